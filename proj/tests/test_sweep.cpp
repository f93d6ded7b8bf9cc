#include <doctest.h>

#include <cmath>
#include <random>

#include "lodom/sweep.hpp"

using namespace lodom;

namespace {

PointCloud ring_cloud(int n, double radius) {
  PointCloud cloud;
  for (int i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / n;
    const double a = 2 * M_PI * s;
    cloud.points.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.3);
    cloud.phase.push_back(s);
  }
  return cloud;
}

}  // namespace

TEST_CASE("stationary vehicle: correction is the identity") {
  const PointCloud cloud = ring_cloud(360, 12.0);
  const Pose6 pose(4, 5, 1, 0.1, 0.0, 0.7);
  const PointCloud out = correct_sweep(cloud, pose, pose);
  for (std::size_t i = 0; i < cloud.size(); ++i)
    CHECK((out.points[i] - cloud.points[i]).norm() < 1e-12);
}

TEST_CASE("forward motion: early points shift back relative to late points") {
  PointCloud cloud;
  cloud.points = {Vec3(10, 0, 0), Vec3(10, 0, 0)};
  cloud.phase = {0.0, 1.0};
  const PointCloud out = correct_sweep(cloud, Pose6(), Pose6(1, 0, 0, 0, 0, 0));
  // phase-1 point is already in the end frame; phase-0 point moves ~1 m back
  CHECK((out.points[1] - Vec3(10, 0, 0)).norm() < 1e-12);
  CHECK(out.points[0].x() == doctest::Approx(9.0));
  CHECK(out.points[0].x() - out.points[1].x() == doctest::Approx(-1.0));
}

TEST_CASE("pure yaw: corrected point matches the closed form") {
  const double omega = 0.3;  // total yaw over the sweep
  const Pose6 start;
  const Pose6 end(0, 0, 0, 0, 0, omega);
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> c(-15.0, 15.0);
  for (int i = 0; i < 200; ++i) {
    PointCloud cloud;
    const Vec3 p(c(rng), c(rng), c(rng));
    const double s = u(rng);
    cloud.points = {p};
    cloud.phase = {s};
    const PointCloud out = correct_sweep(cloud, start, end);
    const Vec3 expected =
        Eigen::AngleAxisd(omega * (s - 1.0), Vec3::UnitZ()).toRotationMatrix() * p;
    CHECK((out.points[0] - expected).norm() < 1e-12);
  }
}

TEST_CASE("equal-phase subsets stay rigid; cross-phase does not") {
  PointCloud cloud;
  // two points at phase 0.2, two at phase 0.9
  cloud.points = {Vec3(5, 0, 0), Vec3(5, 2, 0), Vec3(-3, 1, 0), Vec3(-3, -2, 0)};
  cloud.phase = {0.2, 0.2, 0.9, 0.9};
  const Pose6 end(1.5, 0.3, 0, 0, 0, 0.2);
  const PointCloud out = correct_sweep(cloud, Pose6(), end);

  const double d01_before = (cloud.points[0] - cloud.points[1]).norm();
  const double d01_after = (out.points[0] - out.points[1]).norm();
  CHECK(std::abs(d01_before - d01_after) < 1e-10);

  const double d23_before = (cloud.points[2] - cloud.points[3]).norm();
  const double d23_after = (out.points[2] - out.points[3]).norm();
  CHECK(std::abs(d23_before - d23_after) < 1e-10);

  const double d02_before = (cloud.points[0] - cloud.points[2]).norm();
  const double d02_after = (out.points[0] - out.points[2]).norm();
  CHECK(std::abs(d02_before - d02_after) > 1e-3);  // cross-phase deformation
}

TEST_CASE("correction magnitude is bounded by motion and range") {
  const PointCloud cloud = ring_cloud(720, 20.0);
  const Pose6 end(1.0, 0.5, 0.1, 0.01, 0.0, 0.05);
  const PointCloud out = correct_sweep(cloud, Pose6(), end);
  const double translation = std::sqrt(1.0 + 0.25 + 0.01);
  const double angular = std::sqrt(0.01 * 0.01 + 0.05 * 0.05);
  const double bound = translation + 20.0 * angular + 1e-9;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    CHECK((out.points[i] - cloud.points[i]).norm() <= bound);
}
