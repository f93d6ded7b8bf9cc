#pragma once

#include "lodom/geometry.hpp"

namespace lodom {

/// Motion-compensate one sweep. Each point captured at phase s is assumed
/// taken from interpolate_pose(pose_start, pose_end, s); the output
/// re-expresses every point in the sweep-end frame:
///   p' = T(pose_end)^-1 * T(pose_s) * p.
/// With pose_start == pose_end this is the identity.
PointCloud correct_sweep(const PointCloud& cloud, const Pose6& pose_start,
                         const Pose6& pose_end);

}  // namespace lodom
