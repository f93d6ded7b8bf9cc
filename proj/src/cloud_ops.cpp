#include "lodom/cloud_ops.hpp"

#include <cmath>
#include <cstdint>
#include <unordered_map>

namespace lodom {

namespace {

struct VoxelAccum {
  Vec3 sum = Vec3::Zero();
  double phase_sum = 0.0;
  int count = 0;
};

std::int64_t voxel_key(const Vec3& p, double inv_voxel) {
  const auto qx = static_cast<std::int64_t>(std::floor(p.x() * inv_voxel));
  const auto qy = static_cast<std::int64_t>(std::floor(p.y() * inv_voxel));
  const auto qz = static_cast<std::int64_t>(std::floor(p.z() * inv_voxel));
  // 21 bits per axis, offset to keep them non-negative
  return ((qx + (1 << 20)) << 42) | ((qy + (1 << 20)) << 21) | (qz + (1 << 20));
}

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (voxel <= 0.0) return cloud;
  const double inv = 1.0 / voxel;
  std::unordered_map<std::int64_t, VoxelAccum> grid;
  grid.reserve(cloud.points.size());
  std::vector<std::int64_t> key_order;
  key_order.reserve(cloud.points.size());

  const bool has_phase = cloud.phase.size() == cloud.points.size();
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto key = voxel_key(cloud.points[i], inv);
    auto [it, inserted] = grid.try_emplace(key);
    if (inserted) key_order.push_back(key);
    it->second.sum += cloud.points[i];
    it->second.phase_sum += has_phase ? cloud.phase[i] : 0.0;
    it->second.count += 1;
  }

  PointCloud out;
  out.points.reserve(grid.size());
  out.phase.reserve(grid.size());
  for (const auto key : key_order) {  // insertion order keeps this deterministic
    const auto& acc = grid.at(key);
    out.points.push_back(acc.sum / acc.count);
    out.phase.push_back(acc.phase_sum / acc.count);
  }
  return out;
}

PointCloud stride_sample(const PointCloud& cloud, std::size_t max_points) {
  if (max_points == 0 || cloud.size() <= max_points) return cloud;
  PointCloud out;
  out.points.reserve(max_points);
  out.phase.reserve(max_points);
  const double step = static_cast<double>(cloud.size()) / max_points;
  const bool has_phase = cloud.phase.size() == cloud.points.size();
  for (std::size_t k = 0; k < max_points; ++k) {
    const auto i = static_cast<std::size_t>(k * step);
    out.points.push_back(cloud.points[i]);
    if (has_phase) out.phase.push_back(cloud.phase[i]);
  }
  return out;
}

double mean_range(const std::vector<Vec3>& points) {
  if (points.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : points) sum += p.norm();
  return sum / static_cast<double>(points.size());
}

}  // namespace lodom
