#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lodom/geometry.hpp"
#include "lodom/vehicle_model.hpp"

namespace lodom {

enum class TrajectoryKind { Straight, Circle, UrbanGrid, HighwaySparse };

TrajectoryKind trajectory_kind_from_string(const std::string& name);

/// Closed-form trajectory: a path parameterized by arc length combined
/// with a speed profile (optional linear ramp from rest). Poses are
/// available at any time, which the renderer uses to skew sweeps.
class Trajectory {
 public:
  Trajectory(TrajectoryKind kind, double speed, double ramp_time = 0.0,
             double sensor_height = 1.73, double circle_radius = 50.0,
             double block_side = 90.0, double corner_radius = 20.0);

  Pose6 pose_at(double t) const;
  /// World-frame linear velocity and yaw rate at time t.
  std::pair<Vec3, double> twist_at(double t) const;
  std::vector<TimedPose> sample(std::size_t n_frames, double dt) const;

  TrajectoryKind kind() const { return kind_; }
  double speed() const { return speed_; }
  double block_side() const { return block_side_; }
  double corner_radius() const { return corner_radius_; }
  double sensor_height() const { return sensor_height_; }

 private:
  double arc_length(double t) const;
  double arc_rate(double t) const;
  Pose6 pose_at_arc(double s) const;

  TrajectoryKind kind_;
  double speed_;
  double ramp_time_;
  double sensor_height_;
  double circle_radius_;
  double block_side_;
  double corner_radius_;
};

struct Wall {
  Vec3 origin;   // one base corner
  Vec3 edge_u;   // full horizontal edge
  Vec3 edge_v;   // full vertical edge
};

struct Cylinder {
  double x = 0.0, y = 0.0;
  double radius = 0.15;
  double z0 = 0.0, z1 = 6.0;
};

struct World {
  bool ground = true;  // z = ground_height(x, y), flat by default
  // Gentle terrain undulation amplitude. Perfectly flat synthetic ground
  // forms sensor-locked scan rings that registration can slide on; real
  // ground texture constrains planar motion, so the driving worlds enable
  // a small amplitude.
  double ground_amplitude = 0.0;
  std::vector<Wall> walls;
  std::vector<Cylinder> cylinders;

  double ground_height(double x, double y) const;

  /// Append the four walls of a rectangular building footprint centered at
  /// (cx, cy), rotated by `angle` about z.
  void add_building(double cx, double cy, double width, double depth,
                    double angle, double height);
};

/// Nearest positive ray-primitive intersection distance, if any.
std::optional<double> ray_cast(const World& world, const Vec3& origin,
                               const Vec3& dir);

struct BeamModel {
  int n_beams = 64;
  double elev_min_deg = -24.8;
  double elev_max_deg = 2.0;
  double azimuth_step_deg = 0.2;
  double max_range = 70.0;

  int columns() const { return static_cast<int>(std::lround(360.0 / azimuth_step_deg)); }
};

/// Ray-cast one sweep. pose_at_phase gives the sensor pose at sweep
/// fraction s in [0, 1]; points are reported in the local frame of the
/// pose at their own capture phase (so a moving sensor produces a
/// genuinely skewed cloud). Gaussian range noise with `noise_sigma` > 0.
PointCloud render_scan(const World& world, const BeamModel& beams,
                       const std::function<Pose6(double)>& pose_at_phase,
                       double noise_sigma = 0.0, std::uint64_t seed = 0);

struct Twist {
  Vec3 linear = Vec3::Zero();  // world frame, m/s
  double roll_rate = 0.0, pitch_rate = 0.0, yaw_rate = 0.0;  // rad/s
};

/// Convenience wrapper: constant twist over one sweep of `duration`
/// seconds ending at `pose_end`.
PointCloud render_scan(const World& world, const BeamModel& beams,
                       const Pose6& pose_end, const Twist& motion,
                       double duration, double noise_sigma = 0.0,
                       std::uint64_t seed = 0);

/// Scene matched to the trajectory kind: corner-rich street canyon for
/// urban_grid, sparse barriers/poles for highway_sparse, a simple walled
/// scene otherwise.
World make_world(const Trajectory& trajectory);

struct SynthScenario {
  TrajectoryKind kind = TrajectoryKind::UrbanGrid;
  std::size_t n_frames = 200;
  double dt = 0.1;
  double speed = 10.0;
  double ramp_time = 3.0;
  double sensor_height = 1.73;
  double circle_radius = 50.0;
  double block_side = 90.0;
  double corner_radius = 20.0;
  double range_noise = 0.0;
  std::uint64_t seed = 1;
  BeamModel beams;

  static SynthScenario from_json_file(const std::filesystem::path& path);
  void to_json_file(const std::filesystem::path& path) const;
};

/// Render the scenario and write it as a KITTI-layout sequence directory
/// (velodyne/*.bin, poses.txt with the first pose normalized to identity,
/// calib.txt with an identity Tr). Scan k covers [t_{k-1}, t_k].
void write_sequence(const SynthScenario& scenario,
                    const std::filesystem::path& out_dir);

}  // namespace lodom
