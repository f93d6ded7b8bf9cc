#include "lodom/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace lodom {

double wrap_pi(double angle) {
  double r = std::remainder(angle, 2.0 * M_PI);
  if (r <= -M_PI) r += 2.0 * M_PI;
  return r;
}

double angle_diff(double a, double b) { return wrap_pi(a - b); }

Vec6 Pose6::to_vector() const {
  Vec6 v;
  v << x, y, z, roll, pitch, yaw;
  return v;
}

Pose6 Pose6::from_vector(const Vec6& v) {
  return Pose6(v[0], v[1], v[2], v[3], v[4], v[5]);
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform operator*(const RigidTransform& lhs, const RigidTransform& rhs) {
  RigidTransform out;
  out.rotation = lhs.rotation * rhs.rotation;
  out.translation = lhs.rotation * rhs.translation + lhs.translation;
  return out;
}

RigidTransform RigidTransform::then(const RigidTransform& next) const {
  return next * *this;
}

Mat3 rotation_from_euler(double roll, double pitch, double yaw) {
  const double ca = std::cos(roll), sa = std::sin(roll);
  const double ct = std::cos(pitch), st = std::sin(pitch);
  const double cp = std::cos(yaw), sp = std::sin(yaw);
  Mat3 r;
  r << cp * ct, cp * st * sa - sp * ca, cp * st * ca + sp * sa,
       sp * ct, sp * st * sa + cp * ca, sp * st * ca - cp * sa,
       -st,     ct * sa,               ct * ca;
  return r;
}

void euler_from_rotation(const Mat3& r, double& roll, double& pitch, double& yaw) {
  const double st = -r(2, 0);
  pitch = std::asin(std::clamp(st, -1.0, 1.0));
  if (std::abs(st) < 1.0 - 1e-12) {
    roll = std::atan2(r(2, 1), r(2, 2));
    yaw = std::atan2(r(1, 0), r(0, 0));
  } else {
    // Gimbal lock: roll/yaw indistinguishable; pin roll to zero.
    roll = 0.0;
    yaw = std::atan2(-r(0, 1), r(1, 1));
  }
}

RigidTransform pose_to_transform(const Pose6& pose) {
  RigidTransform t;
  t.rotation = rotation_from_euler(pose.roll, pose.pitch, pose.yaw);
  t.translation = pose.translation();
  return t;
}

Pose6 transform_to_pose(const RigidTransform& t) {
  double roll, pitch, yaw;
  euler_from_rotation(t.rotation, roll, pitch, yaw);
  return Pose6(t.translation.x(), t.translation.y(), t.translation.z(),
               roll, pitch, yaw);
}

Pose6 compose(const Pose6& base, const RigidTransform& motion) {
  return transform_to_pose(pose_to_transform(base) * motion);
}

RigidTransform relative(const Pose6& a, const Pose6& b) {
  return pose_to_transform(a).inverse() * pose_to_transform(b);
}

PointCloud transform_cloud(const PointCloud& cloud, const RigidTransform& t) {
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(t.apply(p));
  out.phase = cloud.phase;
  return out;
}

Pose6 interpolate_pose(const Pose6& p0, const Pose6& p1, double s) {
  if (s < 0.0 || s > 1.0)
    throw std::out_of_range("interpolate_pose: s outside [0, 1]");
  return Pose6(p0.x + s * (p1.x - p0.x),
               p0.y + s * (p1.y - p0.y),
               p0.z + s * (p1.z - p0.z),
               p0.roll + s * angle_diff(p1.roll, p0.roll),
               p0.pitch + s * angle_diff(p1.pitch, p0.pitch),
               p0.yaw + s * angle_diff(p1.yaw, p0.yaw));
}

Mat6 symmetrized(const Mat6& m) { return 0.5 * (m + m.transpose()); }

}  // namespace lodom
