#include "lodom/sweep.hpp"

#include <algorithm>
#include <cmath>

namespace lodom {

PointCloud correct_sweep(const PointCloud& cloud, const Pose6& pose_start,
                         const Pose6& pose_end) {
  PointCloud out;
  out.points.resize(cloud.points.size());
  out.phase = cloud.phase;

  const RigidTransform end_inv = pose_to_transform(pose_end).inverse();
  // Points of one azimuth column share a phase; memoize the last transform.
  double last_s = -1.0;
  RigidTransform last_t;

  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const double s = std::clamp(cloud.phase.empty() ? 1.0 : cloud.phase[i], 0.0, 1.0);
    if (s != last_s) {
      last_t = end_inv * pose_to_transform(interpolate_pose(pose_start, pose_end, s));
      last_s = s;
    }
    out.points[i] = last_t.apply(cloud.points[i]);
  }
  return out;
}

}  // namespace lodom
