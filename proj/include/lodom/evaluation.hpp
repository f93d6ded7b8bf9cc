#pragma once

#include <optional>
#include <vector>

#include "lodom/geometry.hpp"

namespace lodom {

struct RelativeErrors {
  double translation_pct = 0.0;   // mean ||t_err|| / L, in percent
  double rotation_deg_per_m = 0.0;
  std::size_t span_count = 0;
};

/// KITTI odometry metric: relative-pose errors over subsequences of
/// 100..800 m (by accumulated ground-truth path length), averaged over all
/// valid (start, length) spans. Returns nullopt when the trajectory is too
/// short for even a 100 m span.
std::optional<RelativeErrors> kitti_relative_errors(
    const std::vector<Pose6>& estimate, const std::vector<Pose6>& ground_truth);

/// Per-frame planar distance between the trajectories.
std::vector<double> euclidean_xy_error(const std::vector<Pose6>& estimate,
                                       const std::vector<Pose6>& ground_truth);

}  // namespace lodom
