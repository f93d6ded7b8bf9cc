#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lodom/geometry.hpp"
#include "lodom/measurement.hpp"

namespace lodom {

struct CornerConfig {
  double cell_size = 0.6;          // m, (x, y) occupancy grid
  int count_threshold = 20;        // points per cell to call it vertical
  double min_vertical_extent = 0.5;// m, z spread required within the cell
  double cluster_eps = 0.7;        // m, DBSCAN neighborhood radius
  int cluster_min_samples = 50;    // DBSCAN core-point threshold
  int min_cluster_size = 300;      // clusters below this are discarded
  int ransac_iterations = 500;
  double ransac_inlier_dist = 0.05;// m
  double angle_min_deg = 45.0;     // dihedral angle gate
  double angle_max_deg = 135.0;
  double max_normal_z = 0.2;       // planes must be near-vertical
  double assoc_max_dist = 0.5;     // m, corner association gate
  double max_range = 40.0;         // m, candidates beyond this are dropped
  double k_trans = 1.0;            // noise scale, as in the ICP measurements
  double k_rot = 0.5;
  std::uint64_t seed = 12345;      // RANSAC determinism
};

/// A building-corner feature: two near-vertical intersecting planes plus
/// three synthetic points. M and J sit on the intersection line 0.5 m
/// apart, N is 1 m from M at z = 0.
struct CornerFeature {
  Vec3 m, j, n;
  Eigen::Vector4d plane_a;  // unit normal (x, y, z) and offset d: n.p + d = 0
  Eigen::Vector4d plane_b;
  double fit_rmse = 0.0;    // RMS inlier distance of the two RANSAC fits
};

/// Points that project repeatedly into the same (x, y) cell at spread-out
/// heights, i.e. candidates for vertical structure. Returns indices into
/// the cloud.
std::vector<int> detect_vertical_points(const PointCloud& cloud,
                                        const CornerConfig& cfg);

/// Density clustering with DBSCAN semantics (core points have at least
/// min_samples neighbors within eps; clusters are connected core regions
/// plus border points). Clusters below min_cluster_size are dropped.
std::vector<std::vector<int>> cluster(const std::vector<Vec3>& points,
                                      const CornerConfig& cfg);

/// Fit two intersecting near-vertical planes to the cluster with
/// sequential RANSAC and synthesize the corner points. `heading` selects
/// the reference plane (the one whose direction is most longitudinal).
/// Returns nullopt when no valid plane pair exists.
std::optional<CornerFeature> fit_corner(const std::vector<Vec3>& cluster_points,
                                        const CornerConfig& cfg, double heading,
                                        std::uint64_t seed);

/// Full per-cloud corner extraction.
std::vector<CornerFeature> extract_corners(const PointCloud& cloud,
                                           const CornerConfig& cfg,
                                           double heading);

/// Greedy mutual-nearest association on the M points; pairs at or beyond
/// cfg.assoc_max_dist are rejected. Returns (index into a, index into b).
std::vector<std::pair<int, int>> associate(const std::vector<CornerFeature>& a,
                                           const std::vector<CornerFeature>& b,
                                           const CornerConfig& cfg);

/// Least-squares rigid alignment mapping y onto x (the orthogonal
/// Procrustes solution via SVD of the cross-covariance, with the
/// determinant corrected to +1). Requires >= 3 non-collinear
/// correspondences; returns nullopt on degenerate input.
std::optional<RigidTransform> svd_transform(const std::vector<Vec3>& x,
                                            const std::vector<Vec3>& y);

/// Wrap the frame-to-frame corner transform into an absolute measurement
/// anchored at the prediction, with noise scaled from the RANSAC fit RMSE.
Measurement svd_measure(const RigidTransform& delta,
                        const std::vector<double>& fit_rmses,
                        const Pose6& prediction, const CornerConfig& cfg,
                        double range_scale);

}  // namespace lodom
