#include <doctest.h>

#include <cmath>
#include <random>

#include "lodom/evaluation.hpp"

using namespace lodom;

namespace {

std::vector<Pose6> straight_line(int n, double step) {
  std::vector<Pose6> poses;
  for (int i = 0; i < n; ++i) poses.emplace_back(step * i, 0, 0, 0, 0, 0);
  return poses;
}

}  // namespace

TEST_CASE("identical trajectories have zero error") {
  const auto gt = straight_line(901, 1.0);
  const auto errors = kitti_relative_errors(gt, gt);
  REQUIRE(errors.has_value());
  CHECK(errors->translation_pct == doctest::Approx(0.0));
  CHECK(errors->rotation_deg_per_m == doctest::Approx(0.0));
  CHECK(errors->span_count > 0);
}

TEST_CASE("a 1% longitudinal scale error reads as 1% translation error") {
  const auto gt = straight_line(901, 1.0);
  std::vector<Pose6> est = gt;
  for (auto& p : est) p.x *= 1.01;
  const auto errors = kitti_relative_errors(est, gt);
  REQUIRE(errors.has_value());
  CHECK(errors->translation_pct == doctest::Approx(1.00).epsilon(0.01));
}

TEST_CASE("constant yaw bias of 1e-4 rad/m reads as 0.00573 deg/m") {
  const auto gt = straight_line(901, 1.0);
  std::vector<Pose6> est = gt;
  for (int i = 0; i < static_cast<int>(est.size()); ++i)
    est[i].yaw = 1e-4 * est[i].x;  // 0.001 rad per 10 m
  const auto errors = kitti_relative_errors(est, gt);
  REQUIRE(errors.has_value());
  CHECK(errors->rotation_deg_per_m == doctest::Approx(0.0057296).epsilon(0.01));
}

TEST_CASE("trajectories shorter than 100 m yield no spans") {
  const auto gt = straight_line(50, 1.0);
  CHECK_FALSE(kitti_relative_errors(gt, gt).has_value());
}

TEST_CASE("metric is invariant to a global rigid transform of both inputs") {
  std::mt19937 rng(15);
  std::normal_distribution<double> g(0.0, 0.02);
  // non-integer step keeps span boundaries away from exact threshold ties
  const auto gt = straight_line(301, 1.013);
  std::vector<Pose6> est = gt;
  for (auto& p : est) {
    p.x += g(rng);
    p.y += g(rng);
    p.yaw += 0.001 * g(rng);
  }
  const auto base = kitti_relative_errors(est, gt);
  REQUIRE(base.has_value());

  const RigidTransform global =
      pose_to_transform(Pose6(100, -50, 3, 0.0, 0.0, 1.2));
  auto move = [&](const std::vector<Pose6>& poses) {
    std::vector<Pose6> out;
    for (const auto& p : poses)
      out.push_back(transform_to_pose(global * pose_to_transform(p)));
    return out;
  };
  const auto moved = kitti_relative_errors(move(est), move(gt));
  REQUIRE(moved.has_value());
  CHECK(moved->translation_pct == doctest::Approx(base->translation_pct).epsilon(1e-9));
  CHECK(moved->rotation_deg_per_m ==
        doctest::Approx(base->rotation_deg_per_m).epsilon(1e-9));
}

TEST_CASE("length mismatch is a caller error") {
  const auto gt = straight_line(10, 1.0);
  const auto est = straight_line(9, 1.0);
  CHECK_THROWS_AS(kitti_relative_errors(est, gt), std::invalid_argument);
  CHECK_THROWS_AS(euclidean_xy_error(est, gt), std::invalid_argument);
}

TEST_CASE("euclidean_xy_error") {
  const auto gt = straight_line(10, 1.0);
  CHECK(euclidean_xy_error(gt, gt) == std::vector<double>(10, 0.0));

  std::vector<Pose6> est = gt;
  for (auto& p : est) {
    p.x += 3.0;
    p.y += 4.0;
  }
  for (double e : euclidean_xy_error(est, gt)) CHECK(e == doctest::Approx(5.0));

  std::mt19937 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  est = gt;
  for (auto& p : est) {
    p.x += g(rng);
    p.y += g(rng);
    p.z += g(rng);  // z must not contribute
  }
  const auto errs = euclidean_xy_error(est, gt);
  for (std::size_t i = 0; i < errs.size(); ++i) {
    const double expect = std::hypot(est[i].x - gt[i].x, est[i].y - gt[i].y);
    CHECK(errs[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}
