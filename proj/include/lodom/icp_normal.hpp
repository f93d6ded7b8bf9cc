#pragma once

#include <optional>
#include <vector>

#include "lodom/geometry.hpp"
#include "lodom/icp_point.hpp"
#include "lodom/measurement.hpp"

namespace lodom {

struct NormalIcpConfig {
  int k_neighbors = 12;          // plane-fit neighborhood
  double sigma_floor = 0.05;     // rad, minimum heading band half-width
  bool include_transverse = false;  // admit the +-pi/2 bands as well
  int max_iter = 50;
  double tol = 1e-5;             // m, convergence threshold on the objective
  double max_corr_dist = 2.0;    // m
  double voxel = 0.2;            // m
  std::size_t min_points = 100;  // raw-cloud gate and filter fallback gate
  double k_trans = 1.0;
  double k_rot = 0.5;
  // Smallest/largest eigenvalue of the range-normalized normal system
  // below which a direction counts as unobservable.
  double degeneracy_ratio = 2e-3;
};

/// Per-point unit normals with a validity flag (false for degenerate,
/// e.g. collinear, neighborhoods). Normals are oriented toward the origin.
struct NormalField {
  std::vector<Vec3> normals;
  std::vector<std::uint8_t> valid;
};

/// Plane-fit normals over the k nearest neighbors of each point.
/// Requires at least k+1 points.
NormalField estimate_normals(const std::vector<Vec3>& points, int k);

/// Indices of points whose (valid) normal azimuth lies within
/// max(sigma, sigma_floor) of the heading or of heading + pi (and of the
/// transverse directions when cfg.include_transverse is set).
std::vector<int> filter_by_heading(const std::vector<Vec3>& points,
                                   const NormalField& normals, double heading,
                                   double sigma, const NormalIcpConfig& cfg);

/// Point-to-plane ICP against the target subset `target_indices` with the
/// given normals: iterated small-angle linearized least squares. The
/// reported error is the mean absolute plane residual. Returns nullopt on
/// rank-deficient geometry (e.g. all normals parallel).
std::optional<IcpResult> icp_p2plane(const std::vector<Vec3>& source,
                                     const std::vector<Vec3>& target,
                                     const NormalField& normals,
                                     const std::vector<int>& target_indices,
                                     const RigidTransform& seed,
                                     const NormalIcpConfig& cfg);

struct NormalIcpResult {
  Measurement measurement;
  IcpResult icp;
  std::size_t filtered_points = 0;
  bool used_fallback = false;  // heading filter starved, ran unfiltered
};

/// Full measurement: estimate target normals, filter by the predicted
/// heading band (falling back to the unfiltered set when too few points
/// survive or the filtered geometry is rank-deficient), run point-to-plane
/// ICP seeded at the prediction.
std::optional<NormalIcpResult> p2plane_measure(const PointCloud& source,
                                               const PointCloud& target,
                                               const Pose6& prev_estimate,
                                               const Pose6& prediction,
                                               const Mat6& predicted_cov,
                                               const NormalIcpConfig& cfg);

}  // namespace lodom
