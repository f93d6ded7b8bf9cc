#pragma once

#include <Eigen/Dense>
#include <vector>

namespace lodom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Wrap an angle to (-pi, pi].
double wrap_pi(double angle);

/// Signed shortest-arc difference a - b, wrapped to (-pi, pi].
double angle_diff(double a, double b);

/// 6-DoF vehicle pose: position in meters, orientation as intrinsic
/// Z-Y-X Euler angles (yaw about z, then pitch about y, then roll about x),
/// i.e. R = Rz(yaw) * Ry(pitch) * Rx(roll). Angles are normalized to
/// (-pi, pi] on construction.
struct Pose6 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  Pose6() = default;
  Pose6(double x_, double y_, double z_, double roll_, double pitch_, double yaw_)
      : x(x_), y(y_), z(z_),
        roll(wrap_pi(roll_)), pitch(wrap_pi(pitch_)), yaw(wrap_pi(yaw_)) {}

  Vec3 translation() const { return {x, y, z}; }

  /// State-vector order (x, y, z, roll, pitch, yaw).
  Vec6 to_vector() const;
  static Pose6 from_vector(const Vec6& v);
};

/// Rigid transform: p' = rotation * p + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform translate(double x, double y, double z) {
    RigidTransform t;
    t.translation = {x, y, z};
    return t;
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
  RigidTransform then(const RigidTransform& next) const;  // this followed by next? see impl note
};

/// Composition: result applies `rhs` first, then `lhs` (matrix product lhs*rhs).
RigidTransform operator*(const RigidTransform& lhs, const RigidTransform& rhs);

/// One LiDAR sweep. Points are in the sensor frame; phase[i] in [0, 1] is the
/// fraction of the sweep period at which point i was captured (recovered from
/// azimuth when the device does not timestamp points).
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<double> phase;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

Mat3 rotation_from_euler(double roll, double pitch, double yaw);
/// Inverse of rotation_from_euler; exact away from pitch = +-pi/2.
void euler_from_rotation(const Mat3& r, double& roll, double& pitch, double& yaw);

RigidTransform pose_to_transform(const Pose6& pose);
Pose6 transform_to_pose(const RigidTransform& t);

/// Pose of applying `motion` after `base`: T(result) = T(base) * T(motion).
Pose6 compose(const Pose6& base, const RigidTransform& motion);

/// Relative transform with compose(a, relative(a, b)) == b.
RigidTransform relative(const Pose6& a, const Pose6& b);

/// Apply a rigid transform to every point; phases are preserved.
PointCloud transform_cloud(const PointCloud& cloud, const RigidTransform& t);

/// Interpolate with constant rates: linear in translation, shortest-arc
/// constant angular speed per Euler component. s must lie in [0, 1].
Pose6 interpolate_pose(const Pose6& p0, const Pose6& p1, double s);

/// Force exact symmetry: (m + m^T) / 2.
Mat6 symmetrized(const Mat6& m);

}  // namespace lodom
