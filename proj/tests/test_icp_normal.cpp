#include <doctest.h>

#include <cmath>
#include <random>

#include "lodom/icp_normal.hpp"
#include "test_scenes.hpp"

using namespace lodom;

namespace {

NormalIcpConfig test_cfg() {
  NormalIcpConfig cfg;
  cfg.voxel = 0.0;
  return cfg;
}

std::vector<Vec3> plane_grid(const Vec3& origin, const Vec3& du, const Vec3& dv,
                             int nu, int nv) {
  std::vector<Vec3> pts;
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j)
      pts.push_back(origin + i * du + j * dv);
  return pts;
}

std::vector<int> all_indices(std::size_t n) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

TEST_CASE("normals of a horizontal plane are vertical") {
  const auto pts = plane_grid({-3, -3, 0}, {0.3, 0, 0}, {0, 0.3, 0}, 20, 20);
  const NormalField field = estimate_normals(pts, 12);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    REQUIRE(field.valid[i]);
    CHECK(std::abs(std::abs(field.normals[i].z()) - 1.0) < 1e-9);
  }
}

TEST_CASE("normals of a wall at x=5 point back toward the sensor") {
  const auto pts = plane_grid({5, -3, -3}, {0, 0.3, 0}, {0, 0, 0.3}, 20, 20);
  const NormalField field = estimate_normals(pts, 12);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    REQUIRE(field.valid[i]);
    CHECK(field.normals[i].x() == doctest::Approx(-1.0).epsilon(1e-9));
  }
}

TEST_CASE("noisy plane: normals deviate less than 3 degrees on average") {
  std::mt19937 rng(8);
  std::normal_distribution<double> noise(0.0, 0.01);
  auto pts = plane_grid({-5, -5, 2}, {0.25, 0, 0}, {0, 0.25, 0}, 40, 40);
  for (auto& p : pts) p.z() += noise(rng);
  const NormalField field = estimate_normals(pts, 12);

  double angle_sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!field.valid[i]) continue;
    angle_sum += std::acos(std::clamp(std::abs(field.normals[i].z()), 0.0, 1.0));
    ++n;
  }
  CHECK(n > pts.size() / 2);
  CHECK(angle_sum / n < 3.0 * M_PI / 180.0);
}

TEST_CASE("collinear neighborhoods are flagged invalid") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 40; ++i) pts.emplace_back(0.1 * i, 0.0, 0.0);
  const NormalField field = estimate_normals(pts, 12);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK_FALSE(field.valid[i]);
}

TEST_CASE("estimate_normals requires k+1 points") {
  std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}};
  CHECK_THROWS_AS(estimate_normals(pts, 12), std::invalid_argument);
}

TEST_CASE("heading band membership") {
  NormalIcpConfig cfg = test_cfg();
  std::vector<Vec3> pts(3, Vec3::Zero());
  NormalField field;
  field.normals = {Vec3(std::cos(0.05), std::sin(0.05), 0),
                   Vec3(std::cos(1.0), std::sin(1.0), 0),
                   Vec3(-std::cos(0.02), -std::sin(0.02), 0)};  // opposite band
  field.valid = {1, 1, 1};

  const auto kept = filter_by_heading(pts, field, 0.0, 0.1, cfg);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0] == 0);
  CHECK(kept[1] == 2);

  // degenerate band of pi keeps everything
  const auto all = filter_by_heading(pts, field, 0.0, M_PI, cfg);
  CHECK(all.size() == 3);
}

TEST_CASE("corridor walls pass only through the transverse band") {
  // two walls parallel to travel: their normals are transverse (+-y)
  auto pts = plane_grid({0, 6, 0}, {0.3, 0, 0}, {0, 0, 0.3}, 30, 10);
  const auto other = plane_grid({0, -6, 0}, {0.3, 0, 0}, {0, 0, 0.3}, 30, 10);
  pts.insert(pts.end(), other.begin(), other.end());
  const NormalField field = estimate_normals(pts, 12);

  NormalIcpConfig cfg = test_cfg();
  cfg.include_transverse = false;
  CHECK(filter_by_heading(pts, field, 0.0, 0.1, cfg).empty());
  cfg.include_transverse = true;
  CHECK(filter_by_heading(pts, field, 0.0, 0.1, cfg).size() == pts.size());
}

TEST_CASE("icp_p2plane: identity on equal clouds") {
  const PointCloud scene = test::structured_scene();
  const NormalField field = estimate_normals(scene.points, 12);
  const auto result = icp_p2plane(scene.points, scene.points, field,
                                  all_indices(scene.size()),
                                  RigidTransform::identity(), test_cfg());
  REQUIRE(result.has_value());
  CHECK(result->transform.translation.norm() < 1e-6);
  CHECK(result->rmse < 1e-9);
}

TEST_CASE("icp_p2plane recovers a translation faster than point-to-point") {
  const PointCloud target = test::structured_scene();
  const RigidTransform motion = RigidTransform::translate(0.25, 0.15, 0.05);
  const PointCloud source = test::viewed_after_motion(target, motion);

  const NormalField field = estimate_normals(target.points, 12);
  const auto plane_result = icp_p2plane(source.points, target.points, field,
                                        all_indices(target.size()),
                                        RigidTransform::identity(), test_cfg());
  REQUIRE(plane_result.has_value());
  CHECK((plane_result->transform.translation - motion.translation).norm() < 1e-3);

  IcpConfig p2p_cfg;
  p2p_cfg.voxel = 0.0;
  p2p_cfg.parallel_seeds = false;
  const auto point_result =
      icp_p2p(source, target, RigidTransform::identity(), p2p_cfg);
  REQUIRE(point_result.has_value());
  CHECK(plane_result->iterations <= point_result->iterations);
}

TEST_CASE("descent: plane residual at the result is below the seed residual") {
  const PointCloud target = test::structured_scene();
  const RigidTransform motion = RigidTransform::translate(0.3, -0.2, 0.0);
  const PointCloud source = test::viewed_after_motion(target, motion);
  const NormalField field = estimate_normals(target.points, 12);
  const KdTree tree(target.points);

  auto residual = [&](const RigidTransform& t) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& p : source.points) {
      const Vec3 y = t.apply(p);
      double sq;
      const int idx = tree.nearest(y, sq);
      if (idx < 0 || sq > 4.0 || !field.valid[idx]) continue;
      sum += std::abs(field.normals[idx].dot(y - target.points[idx]));
      ++n;
    }
    return sum / n;
  };

  const auto result = icp_p2plane(source.points, target.points, field,
                                  all_indices(target.size()),
                                  RigidTransform::identity(), test_cfg());
  REQUIRE(result.has_value());
  CHECK(result->rmse <= residual(RigidTransform::identity()) + 1e-12);
}

TEST_CASE("parallel normals leave translation unobservable") {
  // a single wall: every normal is (-1, 0, 0)
  const auto wall = plane_grid({5, -4, -4}, {0, 0.25, 0}, {0, 0, 0.25}, 32, 32);
  const NormalField field = estimate_normals(wall, 12);
  const auto result =
      icp_p2plane(wall, wall, field, all_indices(wall.size()),
                  RigidTransform::identity(), test_cfg());
  CHECK_FALSE(result.has_value());
}

TEST_CASE("p2plane_measure seeds at the prediction and reports a pose") {
  const PointCloud target = test::structured_scene();
  const RigidTransform truth = RigidTransform::translate(0.2, 0.05, 0.0);
  const PointCloud source = test::viewed_after_motion(target, truth);

  const Pose6 prev(1.0, -2.0, 0.0, 0.0, 0.0, 0.2);
  const Pose6 prediction = compose(prev, truth);
  const auto result = p2plane_measure(source, target, prev, prediction,
                                      0.0025 * Mat6::Identity(), test_cfg());
  REQUIRE(result.has_value());
  CHECK(std::abs(result->measurement.value.x - prediction.x) < 5e-3);
  CHECK(std::abs(result->measurement.value.y - prediction.y) < 5e-3);
  CHECK(result->measurement.source == MeasurementSource::PointToPlane);
}
