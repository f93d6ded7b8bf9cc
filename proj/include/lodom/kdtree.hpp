#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "lodom/geometry.hpp"

namespace lodom {

/// Static 3-d kd-tree over a point array. Indices returned by queries refer
/// to the array passed at construction, which must outlive the tree.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(const std::vector<Vec3>& points) : points_(&points) {
    order_.resize(points.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!order_.empty()) build(0, order_.size(), 0);
  }

  bool empty() const { return order_.empty(); }

  /// Index of the nearest point and its squared distance.
  int nearest(const Vec3& query, double& sq_dist) const {
    sq_dist = std::numeric_limits<double>::infinity();
    int best = -1;
    if (!order_.empty()) search_nearest(0, order_.size(), 0, query, best, sq_dist);
    return best;
  }

  /// Indices of the k nearest points, closest first.
  std::vector<int> knearest(const Vec3& query, int k) const {
    Heap heap;
    heap.capacity = k;
    if (!order_.empty()) search_knearest(0, order_.size(), 0, query, heap);
    std::sort(heap.items.begin(), heap.items.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<int> out;
    out.reserve(heap.items.size());
    for (const auto& item : heap.items) out.push_back(item.second);
    return out;
  }

  /// Indices of points within `radius` of the query (unsorted).
  std::vector<int> radius(const Vec3& query, double radius) const {
    std::vector<int> out;
    if (!order_.empty())
      search_radius(0, order_.size(), 0, query, radius * radius, out);
    return out;
  }

 private:
  struct Heap {
    // max-heap on distance, bounded to `capacity` items
    std::vector<std::pair<double, int>> items;
    int capacity = 1;
    double worst() const {
      return static_cast<int>(items.size()) < capacity
                 ? std::numeric_limits<double>::infinity()
                 : items.front().first;
    }
    void push(double d, int idx) {
      if (static_cast<int>(items.size()) < capacity) {
        items.emplace_back(d, idx);
        std::push_heap(items.begin(), items.end());
      } else if (d < items.front().first) {
        std::pop_heap(items.begin(), items.end());
        items.back() = {d, idx};
        std::push_heap(items.begin(), items.end());
      }
    }
  };

  const Vec3& at(std::size_t i) const { return (*points_)[order_[i]]; }

  void build(std::size_t begin, std::size_t end, int axis) {
    if (end - begin <= 1) return;
    const std::size_t mid = (begin + end) / 2;
    const auto* pts = points_;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end, [pts, axis](int a, int b) {
                       return (*pts)[a][axis] < (*pts)[b][axis];
                     });
    build(begin, mid, (axis + 1) % 3);
    build(mid + 1, end, (axis + 1) % 3);
  }

  void search_nearest(std::size_t begin, std::size_t end, int axis,
                      const Vec3& q, int& best, double& best_sq) const {
    if (begin >= end) return;
    const std::size_t mid = (begin + end) / 2;
    const Vec3& p = at(mid);
    const double d = (p - q).squaredNorm();
    if (d < best_sq) {
      best_sq = d;
      best = order_[mid];
    }
    const double delta = q[axis] - p[axis];
    const int next = (axis + 1) % 3;
    if (delta < 0) {
      search_nearest(begin, mid, next, q, best, best_sq);
      if (delta * delta < best_sq) search_nearest(mid + 1, end, next, q, best, best_sq);
    } else {
      search_nearest(mid + 1, end, next, q, best, best_sq);
      if (delta * delta < best_sq) search_nearest(begin, mid, next, q, best, best_sq);
    }
  }

  void search_knearest(std::size_t begin, std::size_t end, int axis,
                       const Vec3& q, Heap& heap) const {
    if (begin >= end) return;
    const std::size_t mid = (begin + end) / 2;
    const Vec3& p = at(mid);
    heap.push((p - q).squaredNorm(), order_[mid]);
    const double delta = q[axis] - p[axis];
    const int next = (axis + 1) % 3;
    if (delta < 0) {
      search_knearest(begin, mid, next, q, heap);
      if (delta * delta < heap.worst()) search_knearest(mid + 1, end, next, q, heap);
    } else {
      search_knearest(mid + 1, end, next, q, heap);
      if (delta * delta < heap.worst()) search_knearest(begin, mid, next, q, heap);
    }
  }

  void search_radius(std::size_t begin, std::size_t end, int axis,
                     const Vec3& q, double sq_radius, std::vector<int>& out) const {
    if (begin >= end) return;
    const std::size_t mid = (begin + end) / 2;
    const Vec3& p = at(mid);
    if ((p - q).squaredNorm() <= sq_radius) out.push_back(order_[mid]);
    const double delta = q[axis] - p[axis];
    const int next = (axis + 1) % 3;
    if (delta < 0) {
      search_radius(begin, mid, next, q, sq_radius, out);
      if (delta * delta <= sq_radius) search_radius(mid + 1, end, next, q, sq_radius, out);
    } else {
      search_radius(mid + 1, end, next, q, sq_radius, out);
      if (delta * delta <= sq_radius) search_radius(begin, mid, next, q, sq_radius, out);
    }
  }

  const std::vector<Vec3>* points_ = nullptr;
  std::vector<int> order_;
};

}  // namespace lodom
