#pragma once

#include <optional>
#include <vector>

#include "lodom/geometry.hpp"
#include "lodom/kdtree.hpp"
#include "lodom/measurement.hpp"

namespace lodom {

struct IcpConfig {
  int max_iter = 50;
  double tol = 1e-5;            // m, convergence threshold on the objective
  double max_corr_dist = 2.0;   // m, correspondence rejection gate
  double voxel = 0.2;           // m, downsampling grid (<= 0 disables)
  std::size_t min_points = 100; // required in both raw clouds
  double k_trans = 1.0;         // translation noise scale on the objective
  double k_rot = 0.5;           // rotation noise scale (divided by mean range)
  double seed_scale = 1.0;      // seed ring radius in units of sigma
  bool parallel_seeds = true;
};

struct IcpResult {
  RigidTransform transform;  // maps source points into the target frame
  double rmse = 0.0;         // mean point distance at `transform`
  int iterations = 0;
  bool converged = false;
};

/// Mean nearest-neighbor distance of the transformed source against the
/// target, over pairs within the rejection gate. This is the objective the
/// ICP minimizes and reports.
double registration_error(const std::vector<Vec3>& source,
                          const std::vector<Vec3>& target, const KdTree& tree,
                          const RigidTransform& transform, double max_corr_dist);

/// Point-to-point ICP: alternate nearest-neighbor association with the
/// closed-form rigid alignment until the objective change drops below
/// cfg.tol or cfg.max_iter is reached. Returns nullopt when either cloud
/// has fewer than cfg.min_points points.
std::optional<IcpResult> icp_p2p(const PointCloud& source, const PointCloud& target,
                                 const RigidTransform& seed, const IcpConfig& cfg);

struct MultiplexResult {
  Measurement measurement;
  IcpResult winner;
  int winner_seed = 0;
  int seeds_run = 0;
};

/// Multiplex ICP: eight seeds on the 1-sigma ring of the predicted (x, y)
/// covariance (axis and diagonal offsets), each run to convergence; the
/// minimum-error result becomes the measurement. The measurement noise
/// diagonal scales with the winning objective value.
std::optional<MultiplexResult> multiplex_icp(const PointCloud& source,
                                             const PointCloud& target,
                                             const Pose6& prev_estimate,
                                             const Pose6& prediction,
                                             const Mat6& predicted_cov,
                                             const IcpConfig& cfg);

/// Noise diagonal from an objective value: (k_trans * err)^2 on the
/// translations, (k_rot * err / mean_range)^2 on the angles. The sigma
/// floors keep a tight-but-biased fit from collapsing the filter into
/// overconfidence.
Vec6 noise_from_error(double err, double mean_range, double k_trans, double k_rot,
                      double floor_trans_sigma = 5e-3, double floor_rot_sigma = 5e-4);

}  // namespace lodom
