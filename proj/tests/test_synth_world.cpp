#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <unistd.h>

#include "lodom/corner_svd.hpp"
#include "lodom/icp_normal.hpp"
#include "lodom/icp_point.hpp"
#include "lodom/kitti_io.hpp"
#include "lodom/sweep.hpp"
#include "lodom/synth_world.hpp"

using namespace lodom;
namespace fs = std::filesystem;

namespace {

/// Distance from a world-frame point to the nearest scene surface.
double surface_distance(const World& world, const Vec3& p) {
  double best = world.ground ? std::abs(p.z()) : 1e18;
  for (const auto& w : world.walls) {
    const Vec3 n = w.edge_u.cross(w.edge_v).normalized();
    const Vec3 local = p - w.origin;
    const double su = std::clamp(local.dot(w.edge_u) / w.edge_u.squaredNorm(), 0.0, 1.0);
    const double sv = std::clamp(local.dot(w.edge_v) / w.edge_v.squaredNorm(), 0.0, 1.0);
    best = std::min(best, (local - su * w.edge_u - sv * w.edge_v).norm());
    (void)n;
  }
  for (const auto& c : world.cylinders) {
    const double radial =
        std::abs(std::hypot(p.x() - c.x, p.y() - c.y) - c.radius);
    if (p.z() >= c.z0 && p.z() <= c.z1) best = std::min(best, radial);
  }
  return best;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

BeamModel small_beams() {
  BeamModel b;
  b.n_beams = 32;
  b.azimuth_step_deg = 0.5;
  b.max_range = 60.0;
  return b;
}

}  // namespace

TEST_CASE("straight trajectory at 10 m/s advances 1 m per frame") {
  const Trajectory traj(TrajectoryKind::Straight, 10.0, 0.0);
  const auto frames = traj.sample(5, 0.1);
  for (int k = 0; k < 5; ++k) {
    CHECK(frames[k].pose.x == doctest::Approx(1.0 * k));
    CHECK(frames[k].pose.y == doctest::Approx(0.0));
  }
}

TEST_CASE("circle trajectory has the exact analytic yaw rate") {
  const Trajectory traj(TrajectoryKind::Circle, 10.0, 0.0, 1.73, 50.0);
  const auto [v, yaw_rate] = traj.twist_at(3.0);
  CHECK(yaw_rate == doctest::Approx(0.2).epsilon(1e-12));  // V / R
  CHECK(v.norm() == doctest::Approx(10.0).epsilon(1e-12));
  // pose stays on the circle
  const Pose6 p = traj.pose_at(7.7);
  CHECK(std::hypot(p.x - 0.0, p.y - 50.0) == doctest::Approx(50.0).epsilon(1e-9));
}

TEST_CASE("urban grid trajectory is continuous through the turns") {
  const Trajectory traj(TrajectoryKind::UrbanGrid, 10.0, 0.0);
  const auto frames = traj.sample(260, 0.1);  // covers several corners
  for (std::size_t k = 1; k < frames.size(); ++k) {
    const double jump = std::hypot(frames[k].pose.x - frames[k - 1].pose.x,
                                   frames[k].pose.y - frames[k - 1].pose.y);
    CHECK(jump <= 10.0 * 0.1 + 1e-6);
    CHECK(jump >= 0.05);  // keeps moving
  }
}

TEST_CASE("speed ramp starts from rest") {
  const Trajectory traj(TrajectoryKind::Straight, 10.0, 1.0);
  CHECK(traj.pose_at(-0.1).x == doctest::Approx(0.0));
  CHECK(traj.pose_at(0.0).x == doctest::Approx(0.0));
  CHECK(traj.pose_at(0.5).x == doctest::Approx(10.0 * 0.25 / 2.0));  // v t^2 / (2 ramp)
  CHECK(traj.pose_at(2.0).x == doctest::Approx(10.0 * 1.5));
}

TEST_CASE("stationary render on flat ground satisfies the plane equation") {
  World world;  // ground only
  const Pose6 pose(3.0, -2.0, 1.73, 0.0, 0.0, 0.4);
  const PointCloud cloud =
      render_scan(world, small_beams(), [&](double) { return pose; });
  REQUIRE(cloud.size() > 1000);
  for (const auto& p : cloud.points)
    CHECK(std::abs(p.z() + 1.73) < 1e-9);  // sensor-frame ground height
}

TEST_CASE("wall range matches the analytic ray-plane intersection") {
  World world;
  world.ground = false;
  world.walls.push_back({Vec3(10, -50, -5), Vec3(0, 100, 0), Vec3(0, 0, 15)});
  const Pose6 pose(0, 0, 1.73, 0, 0, 0);
  const PointCloud cloud =
      render_scan(world, small_beams(), [&](double) { return pose; });
  REQUIRE(cloud.size() > 100);
  for (const auto& p : cloud.points)
    CHECK(std::abs(p.x() - 10.0) < 1e-9);  // identity yaw: local x == plane x
}

TEST_CASE("phase is monotone non-decreasing in capture order") {
  World world;
  const PointCloud cloud = render_scan(world, small_beams(),
                                       [](double) { return Pose6(0, 0, 1.73, 0, 0, 0); });
  for (std::size_t i = 1; i < cloud.size(); ++i)
    CHECK(cloud.phase[i] >= cloud.phase[i - 1]);
}

TEST_CASE("range noise is deterministic per seed") {
  World world;
  world.add_building(10, 0, 8, 6, 0.3, 4.0);
  auto pose_fn = [](double) { return Pose6(0, 0, 1.73, 0, 0, 0); };
  const PointCloud a = render_scan(world, small_beams(), pose_fn, 0.02, 7);
  const PointCloud b = render_scan(world, small_beams(), pose_fn, 0.02, 7);
  const PointCloud c = render_scan(world, small_beams(), pose_fn, 0.02, 8);
  REQUIRE(a.size() == b.size());
  bool all_equal = true, differs_from_c = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.points[i] != b.points[i]) all_equal = false;
    if (i < c.size() && a.points[i] != c.points[i]) differs_from_c = true;
  }
  CHECK(all_equal);
  CHECK(differs_from_c);
}

TEST_CASE("moving render skews the cloud; sweep correction undoes it") {
  World world;
  world.ground = false;  // planar ground is invariant to planar motion
  world.add_building(15, 0, 10, 8, 0.0, 5.0);
  world.add_building(-12, 6, 8, 6, 0.5, 4.0);
  world.add_building(4, -14, 9, 7, -0.3, 5.0);

  const Pose6 start(0, 0, 1.73, 0, 0, 0);
  const Pose6 end(1.2, 0.1, 1.73, 0, 0, 0.06);
  Twist twist;
  twist.linear = Vec3(1.2, 0.1, 0.0) / 0.1;
  twist.yaw_rate = 0.06 / 0.1;

  const PointCloud moving =
      render_scan(world, small_beams(), end, twist, 0.1);
  REQUIRE(moving.size() > 2000);

  const RigidTransform t_end = pose_to_transform(end);
  auto median_surface_error = [&](const PointCloud& cloud) {
    std::vector<double> d;
    d.reserve(cloud.size());
    for (const auto& p : cloud.points)
      d.push_back(surface_distance(world, t_end.apply(p)));
    return median(d);
  };

  // raw skewed cloud interpreted in the end frame misses the surfaces
  CHECK(median_surface_error(moving) > 0.02);
  // corrected cloud lies back on them
  const PointCloud corrected = correct_sweep(moving, start, end);
  CHECK(median_surface_error(corrected) < 1e-3);
}

TEST_CASE("urban frames are corner-rich, highway frames are corner-poor") {
  const BeamModel beams;  // full resolution matters for the corner gates
  {
    const Trajectory traj(TrajectoryKind::UrbanGrid, 10.0, 0.0);
    const World world = make_world(traj);
    const Pose6 pose = traj.pose_at(2.0);  // mid first leg
    const PointCloud cloud =
        render_scan(world, beams, [&](double) { return pose; });
    const auto corners = extract_corners(cloud, CornerConfig{}, 0.0);
    CHECK(corners.size() >= 8);
  }
  {
    const Trajectory traj(TrajectoryKind::HighwaySparse, 25.0, 0.0);
    const World world = make_world(traj);
    const Pose6 pose = traj.pose_at(2.0);
    const PointCloud cloud =
        render_scan(world, beams, [&](double) { return pose; });
    const auto corners = extract_corners(cloud, CornerConfig{}, 0.0);
    CHECK(corners.size() < 3);
  }
}

TEST_CASE("zero noise, zero motion: every registration recovers the identity") {
  const Trajectory traj(TrajectoryKind::UrbanGrid, 10.0, 0.0);
  const World world = make_world(traj);
  const BeamModel beams = small_beams();

  const Pose6 a = traj.pose_at(1.0);
  const PointCloud cloud = render_scan(world, beams, [&](double) { return a; });

  IcpConfig cfg;
  cfg.parallel_seeds = false;
  const auto p2p = icp_p2p(cloud, cloud, RigidTransform::identity(), cfg);
  REQUIRE(p2p.has_value());
  CHECK(p2p->transform.translation.norm() < 1e-3);

  NormalIcpConfig ncfg;
  const auto p2plane = p2plane_measure(cloud, cloud, a, a,
                                       1e-4 * Mat6::Identity(), ncfg);
  REQUIRE(p2plane.has_value());
  CHECK(std::abs(p2plane->measurement.value.x - a.x) < 1e-3);
  CHECK(std::abs(p2plane->measurement.value.y - a.y) < 1e-3);
  CHECK(std::abs(angle_diff(p2plane->measurement.value.yaw, a.yaw)) <
        0.05 * M_PI / 180.0);
}

TEST_CASE("zero noise, 1 m motion: point-to-plane recovers the true delta") {
  // point-to-plane is invariant to in-plane sliding, so the sensor-locked
  // ground rings cannot drag it the way they bias point-to-point
  const Trajectory traj(TrajectoryKind::UrbanGrid, 10.0, 0.0);
  const World world = make_world(traj);
  const BeamModel beams = small_beams();

  const Pose6 a = traj.pose_at(1.0);
  const Pose6 b = traj.pose_at(1.1);
  const PointCloud target = render_scan(world, beams, [&](double) { return a; });
  const PointCloud source = render_scan(world, beams, [&](double) { return b; });

  NormalIcpConfig ncfg;
  ncfg.include_transverse = true;
  ncfg.max_corr_dist = 0.6;  // tight gate: the seed is already exact
  const auto p2plane = p2plane_measure(source, target, a, b,
                                       1e-4 * Mat6::Identity(), ncfg);
  REQUIRE(p2plane.has_value());
  CHECK(std::abs(p2plane->measurement.value.x - b.x) < 5e-3);
  CHECK(std::abs(p2plane->measurement.value.y - b.y) < 5e-3);
  CHECK(std::abs(angle_diff(p2plane->measurement.value.yaw, b.yaw)) <
        0.1 * M_PI / 180.0);
}

TEST_CASE("write_sequence produces a readable KITTI-layout directory") {
  const fs::path dir = fs::temp_directory_path() /
                       ("lodom_synth_" + std::to_string(::getpid()));
  SynthScenario scenario;
  scenario.kind = TrajectoryKind::Straight;
  scenario.n_frames = 3;
  scenario.speed = 5.0;
  scenario.ramp_time = 0.0;
  scenario.beams = small_beams();
  write_sequence(scenario, dir);

  const auto src = SequenceSource::open(dir);
  CHECK(src.size() == 3);
  REQUIRE(src.has_ground_truth());
  CHECK(src.ground_truth()[0].x == doctest::Approx(0.0));
  CHECK(src.ground_truth()[1].x == doctest::Approx(0.5));  // 5 m/s * 0.1 s
  CHECK(src.ground_truth()[2].x == doctest::Approx(1.0));
  CHECK(src.scan(1).size() > 500);

  const auto scenario2 = SynthScenario::from_json_file(dir / "scenario.json");
  CHECK(scenario2.n_frames == 3);
  CHECK(scenario2.kind == TrajectoryKind::Straight);
  fs::remove_all(dir);
}
