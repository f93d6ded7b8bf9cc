#include "lodom/evaluation.hpp"

#include <cmath>
#include <stdexcept>

namespace lodom {

namespace {

constexpr double kLengths[] = {100, 200, 300, 400, 500, 600, 700, 800};

double rotation_angle(const Mat3& r) {
  return std::acos(std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0));
}

}  // namespace

std::optional<RelativeErrors> kitti_relative_errors(
    const std::vector<Pose6>& estimate, const std::vector<Pose6>& ground_truth) {
  if (estimate.size() != ground_truth.size())
    throw std::invalid_argument("kitti_relative_errors: length mismatch");
  const std::size_t n = estimate.size();
  if (n < 2) return std::nullopt;

  std::vector<double> dist(n, 0.0);
  for (std::size_t i = 1; i < n; ++i)
    dist[i] = dist[i - 1] +
              (ground_truth[i].translation() - ground_truth[i - 1].translation()).norm();

  std::vector<RigidTransform> est(n), gt(n);
  for (std::size_t i = 0; i < n; ++i) {
    est[i] = pose_to_transform(estimate[i]);
    gt[i] = pose_to_transform(ground_truth[i]);
  }

  double t_sum = 0.0, r_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < n; ++start) {
    std::size_t end = start;
    for (double length : kLengths) {
      while (end < n && dist[end] - dist[start] < length) ++end;
      if (end >= n) break;
      const RigidTransform gt_rel = gt[start].inverse() * gt[end];
      const RigidTransform est_rel = est[start].inverse() * est[end];
      const RigidTransform err = gt_rel.inverse() * est_rel;
      t_sum += err.translation.norm() / length;
      r_sum += rotation_angle(err.rotation) / length;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;

  RelativeErrors out;
  out.translation_pct = 100.0 * t_sum / static_cast<double>(count);
  out.rotation_deg_per_m = (180.0 / M_PI) * r_sum / static_cast<double>(count);
  out.span_count = count;
  return out;
}

std::vector<double> euclidean_xy_error(const std::vector<Pose6>& estimate,
                                       const std::vector<Pose6>& ground_truth) {
  if (estimate.size() != ground_truth.size())
    throw std::invalid_argument("euclidean_xy_error: length mismatch");
  std::vector<double> out(estimate.size());
  for (std::size_t i = 0; i < estimate.size(); ++i)
    out[i] = std::hypot(estimate[i].x - ground_truth[i].x,
                        estimate[i].y - ground_truth[i].y);
  return out;
}

}  // namespace lodom
