#include "lodom/synth_world.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "lodom/kitti_io.hpp"

namespace lodom {

TrajectoryKind trajectory_kind_from_string(const std::string& name) {
  if (name == "straight") return TrajectoryKind::Straight;
  if (name == "circle") return TrajectoryKind::Circle;
  if (name == "urban_grid") return TrajectoryKind::UrbanGrid;
  if (name == "highway_sparse") return TrajectoryKind::HighwaySparse;
  throw std::invalid_argument("unknown trajectory kind: " + name);
}

namespace {

std::string to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::Straight: return "straight";
    case TrajectoryKind::Circle: return "circle";
    case TrajectoryKind::UrbanGrid: return "urban_grid";
    case TrajectoryKind::HighwaySparse: return "highway_sparse";
  }
  return "?";
}

}  // namespace

Trajectory::Trajectory(TrajectoryKind kind, double speed, double ramp_time,
                       double sensor_height, double circle_radius,
                       double block_side, double corner_radius)
    : kind_(kind), speed_(speed), ramp_time_(ramp_time),
      sensor_height_(sensor_height), circle_radius_(circle_radius),
      block_side_(block_side), corner_radius_(corner_radius) {}

double Trajectory::arc_length(double t) const {
  if (t <= 0.0) return 0.0;
  if (ramp_time_ > 0.0 && t < ramp_time_)
    return speed_ * t * t / (2.0 * ramp_time_);
  const double t0 = ramp_time_ > 0.0 ? ramp_time_ / 2.0 : 0.0;
  return speed_ * (t - t0);
}

double Trajectory::arc_rate(double t) const {
  if (t <= 0.0) return 0.0;
  if (ramp_time_ > 0.0 && t < ramp_time_) return speed_ * t / ramp_time_;
  return speed_;
}

Pose6 Trajectory::pose_at_arc(double s) const {
  switch (kind_) {
    case TrajectoryKind::Straight:
    case TrajectoryKind::HighwaySparse:
      return Pose6(s, 0.0, sensor_height_, 0.0, 0.0, 0.0);
    case TrajectoryKind::Circle: {
      const double a = s / circle_radius_;
      return Pose6(circle_radius_ * std::sin(a),
                   circle_radius_ * (1.0 - std::cos(a)), sensor_height_, 0.0,
                   0.0, a);
    }
    case TrajectoryKind::UrbanGrid: {
      const double straight = block_side_ - 2.0 * corner_radius_;
      const double arc = corner_radius_ * M_PI / 2.0;
      const double leg = straight + arc;
      const double perimeter = 4.0 * leg;
      double u = std::fmod(s, perimeter);
      if (u < 0.0) u += perimeter;

      // Walk the legs; each leg is a straight stretch then a left quarter
      // turn.
      Eigen::Vector2d pos(0.0, 0.0);
      double heading = 0.0;
      for (int k = 0; k < 4; ++k) {
        const Eigen::Vector2d dir(std::cos(heading), std::sin(heading));
        if (u <= straight) {
          pos += u * dir;
          return Pose6(pos.x(), pos.y(), sensor_height_, 0.0, 0.0, heading);
        }
        u -= straight;
        pos += straight * dir;
        const Eigen::Vector2d left(-dir.y(), dir.x());
        const Eigen::Vector2d center = pos + corner_radius_ * left;
        if (u <= arc) {
          const double swept = u / corner_radius_;
          const Eigen::Vector2d radial = -left;  // from center to entry point
          const double a0 = std::atan2(radial.y(), radial.x());
          const Eigen::Vector2d p =
              center + corner_radius_ * Eigen::Vector2d(std::cos(a0 + swept),
                                                        std::sin(a0 + swept));
          return Pose6(p.x(), p.y(), sensor_height_, 0.0, 0.0, heading + swept);
        }
        u -= arc;
        pos = center + corner_radius_ * dir;  // quarter-turn exit point
        heading += M_PI / 2.0;
      }
      return Pose6(pos.x(), pos.y(), sensor_height_, 0.0, 0.0, heading);
    }
  }
  return Pose6();
}

Pose6 Trajectory::pose_at(double t) const { return pose_at_arc(arc_length(t)); }

std::pair<Vec3, double> Trajectory::twist_at(double t) const {
  const double rate = arc_rate(t);
  const Pose6 pose = pose_at(t);
  double curvature = 0.0;
  switch (kind_) {
    case TrajectoryKind::Circle:
      curvature = 1.0 / circle_radius_;
      break;
    case TrajectoryKind::UrbanGrid: {
      const double straight = block_side_ - 2.0 * corner_radius_;
      const double arc = corner_radius_ * M_PI / 2.0;
      const double leg = straight + arc;
      double u = std::fmod(arc_length(t), 4.0 * leg);
      if (u < 0.0) u += 4.0 * leg;
      u = std::fmod(u, leg);
      curvature = u > straight ? 1.0 / corner_radius_ : 0.0;
      break;
    }
    default:
      break;
  }
  const Vec3 v(rate * std::cos(pose.yaw), rate * std::sin(pose.yaw), 0.0);
  return {v, rate * curvature};
}

std::vector<TimedPose> Trajectory::sample(std::size_t n_frames, double dt) const {
  std::vector<TimedPose> out;
  out.reserve(n_frames);
  for (std::size_t k = 0; k < n_frames; ++k)
    out.push_back({static_cast<double>(k) * dt, pose_at(static_cast<double>(k) * dt)});
  return out;
}

void World::add_building(double cx, double cy, double width, double depth,
                         double angle, double height) {
  const double c = std::cos(angle), s = std::sin(angle);
  auto corner = [&](double lx, double ly) {
    return Vec3(cx + c * lx - s * ly, cy + s * lx + c * ly, 0.0);
  };
  const Vec3 p0 = corner(-width / 2, -depth / 2);
  const Vec3 p1 = corner(+width / 2, -depth / 2);
  const Vec3 p2 = corner(+width / 2, +depth / 2);
  const Vec3 p3 = corner(-width / 2, +depth / 2);
  const Vec3 up(0.0, 0.0, height);
  walls.push_back({p0, p1 - p0, up});
  walls.push_back({p1, p2 - p1, up});
  walls.push_back({p2, p3 - p2, up});
  walls.push_back({p3, p0 - p3, up});
}

double World::ground_height(double x, double y) const {
  if (ground_amplitude == 0.0) return 0.0;
  return ground_amplitude *
         (std::sin(x * (2.0 * M_PI / 9.0)) * std::cos(y * (2.0 * M_PI / 13.0)) +
          0.6 * std::sin((x + y) * (2.0 * M_PI / 23.0)));
}

namespace {

std::optional<double> intersect_wall(const Wall& w, const Vec3& o, const Vec3& d) {
  const Vec3 n = w.edge_u.cross(w.edge_v);
  const double denom = n.dot(d);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double t = n.dot(w.origin - o) / denom;
  if (t <= 1e-6) return std::nullopt;
  const Vec3 local = o + t * d - w.origin;
  const double uu = w.edge_u.squaredNorm();
  const double vv = w.edge_v.squaredNorm();
  const double su = local.dot(w.edge_u) / uu;
  const double sv = local.dot(w.edge_v) / vv;
  if (su < 0.0 || su > 1.0 || sv < 0.0 || sv > 1.0) return std::nullopt;
  return t;
}

std::optional<double> intersect_cylinder(const Cylinder& cyl, const Vec3& o,
                                         const Vec3& d) {
  const double ox = o.x() - cyl.x, oy = o.y() - cyl.y;
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a < 1e-12) return std::nullopt;
  const double b = 2.0 * (ox * d.x() + oy * d.y());
  const double c = ox * ox + oy * oy - cyl.radius * cyl.radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
    if (t <= 1e-6) continue;
    const double z = o.z() + t * d.z();
    if (z >= cyl.z0 && z <= cyl.z1) return t;
  }
  return std::nullopt;
}

std::optional<double> intersect_flat_ground(const Vec3& o, const Vec3& d) {
  if (d.z() >= -1e-12) return std::nullopt;
  const double t = -o.z() / d.z();
  if (t <= 1e-6) return std::nullopt;
  return t;
}

std::optional<double> intersect_ground(const World& world, const Vec3& o,
                                       const Vec3& d) {
  if (world.ground_amplitude == 0.0) return intersect_flat_ground(o, d);
  if (d.z() >= -1e-12) return std::nullopt;
  // Bisect f(t) = ray_z(t) - ground_height around the flat-ground root.
  auto f = [&](double t) {
    const Vec3 p = o + t * d;
    return p.z() - world.ground_height(p.x(), p.y());
  };
  const double t_flat = -o.z() / d.z();
  if (t_flat <= 1e-6) return std::nullopt;
  double lo = std::max(1e-6, 0.3 * t_flat), hi = 2.2 * t_flat;
  if (f(lo) <= 0.0 || f(hi) >= 0.0) return std::nullopt;  // grazing, skip
  for (int iter = 0; iter < 40; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::optional<double> ray_cast(const World& world, const Vec3& origin,
                               const Vec3& dir) {
  std::optional<double> best;
  auto consider = [&](std::optional<double> t) {
    if (t && (!best || *t < *best)) best = t;
  };
  if (world.ground) consider(intersect_ground(world, origin, dir));
  for (const auto& w : world.walls) consider(intersect_wall(w, origin, dir));
  for (const auto& c : world.cylinders) consider(intersect_cylinder(c, origin, dir));
  return best;
}

PointCloud render_scan(const World& world, const BeamModel& beams,
                       const std::function<Pose6(double)>& pose_at_phase,
                       double noise_sigma, std::uint64_t seed) {
  const int cols = beams.columns();
  const int n_beams = beams.n_beams;
  const double elev0 = beams.elev_min_deg * M_PI / 180.0;
  const double delev = n_beams > 1 ? (beams.elev_max_deg - beams.elev_min_deg) *
                                         M_PI / 180.0 / (n_beams - 1)
                                   : 0.0;

  // Azimuth-binned candidate lists: each primitive occupies the sensor
  // columns its bounding circle subtends from the sweep origin. Bins are
  // indexed by the sensor-frame azimuth, so the start yaw is subtracted
  // and the padding absorbs translation and rotation during the sweep.
  const Pose6 pose0 = pose_at_phase(0.0);
  const Pose6 pose1 = pose_at_phase(1.0);
  const Vec3 origin0 = pose0.translation();
  const double pad = (pose1.translation() - origin0).norm() + 1.0;
  const double yaw_pad = std::abs(angle_diff(pose1.yaw, pose0.yaw)) +
                         std::abs(pose0.pitch) + std::abs(pose0.roll) + 0.02;

  const int n_walls = static_cast<int>(world.walls.size());
  std::vector<std::vector<int>> bins(cols);
  auto mark = [&](const Eigen::Vector2d& center, double radius, int id) {
    const Eigen::Vector2d rel = center - origin0.head<2>();
    const double dist = rel.norm();
    if (dist - radius > beams.max_range + pad) return;
    if (dist <= radius + pad + 1e-6) {
      for (auto& bin : bins) bin.push_back(id);
      return;
    }
    const double az = std::atan2(rel.y(), rel.x()) - pose0.yaw;
    const double half =
        std::asin(std::min(1.0, (radius + pad) / dist)) + yaw_pad;
    const double step = 2.0 * M_PI / cols;
    const int lo = static_cast<int>(std::floor((az - half) / step));
    const int hi = static_cast<int>(std::ceil((az + half) / step));
    for (int b = lo; b <= hi; ++b) bins[((b % cols) + cols) % cols].push_back(id);
  };
  for (int i = 0; i < n_walls; ++i) {
    const Wall& w = world.walls[i];
    const Vec3 center3 = w.origin + 0.5 * w.edge_u + 0.5 * w.edge_v;
    const double radius = 0.5 * std::sqrt(w.edge_u.squaredNorm() + w.edge_v.squaredNorm());
    mark(center3.head<2>(), radius, i);
  }
  for (std::size_t i = 0; i < world.cylinders.size(); ++i) {
    const auto& cyl = world.cylinders[i];
    mark({cyl.x, cyl.y}, cyl.radius, n_walls + static_cast<int>(i));
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise_sigma);

  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(cols) * n_beams / 2);
  cloud.phase.reserve(cloud.points.capacity());

  for (int col = 0; col < cols; ++col) {
    const double phase = static_cast<double>(col) / cols;
    const Pose6 pose = pose_at_phase(phase);
    const RigidTransform t = pose_to_transform(pose);
    const double az = 2.0 * M_PI * phase;
    const double caz = std::cos(az), saz = std::sin(az);

    for (int b = 0; b < n_beams; ++b) {
      const double elev = elev0 + b * delev;
      const double ce = std::cos(elev), se = std::sin(elev);
      const Vec3 dir_local(ce * caz, ce * saz, se);
      const Vec3 dir = t.rotation * dir_local;

      std::optional<double> hit;
      if (world.ground) hit = intersect_ground(world, t.translation, dir);
      for (int id : bins[col]) {
        std::optional<double> ht =
            id < n_walls ? intersect_wall(world.walls[id], t.translation, dir)
                         : intersect_cylinder(world.cylinders[id - n_walls],
                                              t.translation, dir);
        if (ht && (!hit || *ht < *hit)) hit = ht;
      }
      if (!hit || *hit > beams.max_range) continue;
      double range = *hit;
      if (noise_sigma > 0.0) range = std::max(0.1, range + gauss(rng));
      cloud.points.push_back(range * dir_local);
      cloud.phase.push_back(phase);
    }
  }
  return cloud;
}

PointCloud render_scan(const World& world, const BeamModel& beams,
                       const Pose6& pose_end, const Twist& motion,
                       double duration, double noise_sigma, std::uint64_t seed) {
  auto pose_at_phase = [&](double s) {
    const double back = (1.0 - s) * duration;
    return Pose6(pose_end.x - motion.linear.x() * back,
                 pose_end.y - motion.linear.y() * back,
                 pose_end.z - motion.linear.z() * back,
                 pose_end.roll - motion.roll_rate * back,
                 pose_end.pitch - motion.pitch_rate * back,
                 pose_end.yaw - motion.yaw_rate * back);
  };
  return render_scan(world, beams, pose_at_phase, noise_sigma, seed);
}

namespace {

/// Deterministic small hash for procedural variation.
std::uint64_t mix(std::uint64_t v) {
  v ^= v >> 33;
  v *= 0xff51afd7ed558ccdull;
  v ^= v >> 33;
  return v;
}

void add_street_buildings(World& world, const Eigen::Vector2d& start,
                          double heading, double length, int& index) {
  const Eigen::Vector2d dir(std::cos(heading), std::sin(heading));
  const Eigen::Vector2d left(-dir.y(), dir.x());
  for (double a = 6.0; a <= length - 6.0; a += 13.0) {
    for (double side : {-1.0, 1.0}) {
      const Eigen::Vector2d c = start + a * dir + side * 11.0 * left;
      const std::uint64_t h = mix(static_cast<std::uint64_t>(++index) * 2654435761ull);
      const double height = 4.0 + static_cast<double>(h & 3);
      const double rot = heading + (((h >> 2) & 1) ? 1.0 : -1.0) *
                                       (0.35 + 0.05 * static_cast<double>((h >> 3) & 3));
      world.add_building(c.x(), c.y(), 7.0, 5.0, rot, height);
    }
  }
}

/// Signed distance from p to the block circuit centerline (a rounded
/// rectangle); negative inside the block.
double circuit_distance(const Eigen::Vector2d& p, double side, double r) {
  const Eigen::Vector2d center(side / 2.0 - r, side / 2.0);
  const Eigen::Vector2d core(side / 2.0 - r, side / 2.0 - r);  // half extents
  const Eigen::Vector2d q = (p - center).cwiseAbs() - core;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(std::max(q.x(), q.y()), 0.0);
  return outside + inside - r;
}

}  // namespace

World make_world(const Trajectory& traj) {
  World world;
  switch (traj.kind()) {
    case TrajectoryKind::UrbanGrid: {
      world.ground_amplitude = 0.08;
      const double side = traj.block_side();
      const double r = traj.corner_radius();
      // Buildings on a staggered grid in the annulus flanking the block
      // circuit: dense enough for eight-plus visible corners per frame,
      // spaced so clusters never merge across footprints. Rotated
      // footprints expose two faces to the street.
      int index = 0;
      for (double gx = -40.0; gx <= side + 40.0; gx += 8.5) {
        for (double gy = -40.0; gy <= side + 40.0; gy += 8.5) {
          const std::uint64_t h =
              mix(static_cast<std::uint64_t>(++index) * 2654435761ull);
          const double jx = 1.0 * (static_cast<double>(h & 255) / 255.0 - 0.5);
          const double jy = 1.0 * (static_cast<double>((h >> 8) & 255) / 255.0 - 0.5);
          const Eigen::Vector2d c(gx + jx, gy + jy);
          const double d = std::abs(circuit_distance(c, side, r));
          if (d < 8.5 || d > 24.0) continue;
          const double height = 4.0 + static_cast<double>((h >> 16) & 3);
          // Uniformly random footprint rotations decorrelate the face
          // normals from any particular sight line, so most buildings show
          // two faces (and hence a corner) from wherever the vehicle is.
          const double rot =
              (M_PI / 2.0) * static_cast<double>((h >> 19) & 1023) / 1024.0;
          world.add_building(c.x(), c.y(), 5.0, 4.0, rot, height);
        }
      }
      // A few street lights
      world.cylinders.push_back({15.0, 7.0, 0.15, 0.0, 6.0});
      world.cylinders.push_back({35.0, -7.0, 0.15, 0.0, 6.0});
      world.cylinders.push_back({side - 2.0 * r + 7.0, 20.0, 0.15, 0.0, 6.0});
      break;
    }
    case TrajectoryKind::HighwaySparse: {
      world.ground_amplitude = 0.03;  // smooth asphalt
      // Guardrail segments with long gaps, alternating sides, plus sparse
      // delineator posts. Deliberately feature-poor.
      const double road_end = 1200.0;
      for (double x = -20.0; x < road_end; x += 80.0) {
        world.walls.push_back({Vec3(x, -10.0, 0.0), Vec3(20.0, 0.0, 0.0),
                               Vec3(0.0, 0.0, 0.9)});
        world.walls.push_back({Vec3(x + 40.0, 10.0, 0.0), Vec3(20.0, 0.0, 0.0),
                               Vec3(0.0, 0.0, 0.9)});
      }
      for (double x = 0.0; x < road_end; x += 60.0) {
        world.cylinders.push_back({x, 14.0, 0.15, 0.0, 5.0});
        world.cylinders.push_back({x + 30.0, -14.0, 0.15, 0.0, 5.0});
      }
      break;
    }
    case TrajectoryKind::Straight:
    case TrajectoryKind::Circle: {
      world.ground_amplitude = 0.05;
      // Generic corridor with periodic structure on both sides.
      const double length = traj.kind() == TrajectoryKind::Circle ? 0.0 : 600.0;
      if (traj.kind() == TrajectoryKind::Straight) {
        int index = 0;
        add_street_buildings(world, {0.0, 0.0}, 0.0, length, index);
      } else {
        const double r = 50.0;  // matches the default circle radius
        for (int k = 0; k < 18; ++k) {
          const double a = 2.0 * M_PI * k / 18.0;
          const double rr = (k % 2 == 0) ? r - 13.0 : r + 13.0;
          world.add_building(rr * std::sin(a), r - rr * std::cos(a), 9.0, 7.0,
                             a + ((k % 3) - 1) * 0.3, 5.0);
        }
      }
      break;
    }
  }
  return world;
}

SynthScenario SynthScenario::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario " + path.string());
  nlohmann::json j;
  in >> j;

  SynthScenario s;
  s.kind = trajectory_kind_from_string(j.value("kind", std::string("urban_grid")));
  s.n_frames = j.value("n_frames", s.n_frames);
  s.dt = j.value("dt", s.dt);
  s.speed = j.value("speed", s.speed);
  s.ramp_time = j.value("ramp_time", s.ramp_time);
  s.sensor_height = j.value("sensor_height", s.sensor_height);
  s.circle_radius = j.value("circle_radius", s.circle_radius);
  s.block_side = j.value("block_side", s.block_side);
  s.corner_radius = j.value("corner_radius", s.corner_radius);
  s.range_noise = j.value("range_noise", s.range_noise);
  s.seed = j.value("seed", s.seed);
  s.beams.n_beams = j.value("n_beams", s.beams.n_beams);
  s.beams.azimuth_step_deg = j.value("azimuth_step_deg", s.beams.azimuth_step_deg);
  s.beams.max_range = j.value("max_range", s.beams.max_range);
  return s;
}

void SynthScenario::to_json_file(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["kind"] = lodom::to_string(kind);
  j["n_frames"] = n_frames;
  j["dt"] = dt;
  j["speed"] = speed;
  j["ramp_time"] = ramp_time;
  j["sensor_height"] = sensor_height;
  j["circle_radius"] = circle_radius;
  j["block_side"] = block_side;
  j["corner_radius"] = corner_radius;
  j["range_noise"] = range_noise;
  j["seed"] = seed;
  j["n_beams"] = beams.n_beams;
  j["azimuth_step_deg"] = beams.azimuth_step_deg;
  j["max_range"] = beams.max_range;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

void write_sequence(const SynthScenario& scenario,
                    const std::filesystem::path& out_dir) {
  const Trajectory traj(scenario.kind, scenario.speed, scenario.ramp_time,
                        scenario.sensor_height, scenario.circle_radius,
                        scenario.block_side, scenario.corner_radius);
  const World world = make_world(traj);

  std::filesystem::create_directories(out_dir / "velodyne");

  std::vector<Pose6> gt;
  gt.reserve(scenario.n_frames);
  const RigidTransform t0_inv = pose_to_transform(traj.pose_at(0.0)).inverse();

  for (std::size_t k = 0; k < scenario.n_frames; ++k) {
    const double t_end = static_cast<double>(k) * scenario.dt;
    auto pose_fn = [&](double s) {
      return traj.pose_at(t_end - (1.0 - s) * scenario.dt);
    };
    const PointCloud cloud =
        render_scan(world, scenario.beams, pose_fn, scenario.range_noise,
                    scenario.seed * 1000003ull + k);
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.bin", k);
    write_scan(cloud, out_dir / "velodyne" / name);
    gt.push_back(transform_to_pose(t0_inv * pose_to_transform(traj.pose_at(t_end))));
  }

  write_trajectory(gt, out_dir / "poses.txt");
  std::ofstream calib(out_dir / "calib.txt");
  calib << "Tr: 1 0 0 0 0 1 0 0 0 0 1 0\n";
  scenario.to_json_file(out_dir / "scenario.json");
}

}  // namespace lodom
