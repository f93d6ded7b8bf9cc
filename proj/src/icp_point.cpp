#include "lodom/icp_point.hpp"

#include <cmath>
#include <future>
#include <thread>

#include "lodom/cloud_ops.hpp"
#include "lodom/corner_svd.hpp"

namespace lodom {

double registration_error(const std::vector<Vec3>& source,
                          const std::vector<Vec3>& target, const KdTree& tree,
                          const RigidTransform& transform, double max_corr_dist) {
  (void)target;
  const double gate_sq = max_corr_dist * max_corr_dist;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& p : source) {
    const Vec3 q = transform.apply(p);
    double sq;
    if (tree.nearest(q, sq) >= 0 && sq <= gate_sq) {
      sum += std::sqrt(sq);
      ++count;
    }
  }
  return count == 0 ? std::numeric_limits<double>::infinity()
                    : sum / static_cast<double>(count);
}

std::optional<IcpResult> icp_p2p(const PointCloud& source, const PointCloud& target,
                                 const RigidTransform& seed, const IcpConfig& cfg) {
  if (source.size() < cfg.min_points || target.size() < cfg.min_points)
    return std::nullopt;

  const PointCloud src = voxel_downsample(source, cfg.voxel);
  const PointCloud tgt = voxel_downsample(target, cfg.voxel);
  const KdTree tree(tgt.points);
  const double gate_sq = cfg.max_corr_dist * cfg.max_corr_dist;

  IcpResult result;
  result.transform = seed;
  double prev_err = std::numeric_limits<double>::infinity();

  std::vector<Vec3> matched_src, matched_tgt;
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    matched_src.clear();
    matched_tgt.clear();
    for (const auto& p : src.points) {
      const Vec3 q = result.transform.apply(p);
      double sq;
      const int idx = tree.nearest(q, sq);
      if (idx >= 0 && sq <= gate_sq) {
        matched_src.push_back(q);
        matched_tgt.push_back(tgt.points[idx]);
      }
    }
    if (matched_src.size() < 3) break;

    const auto delta = svd_transform(matched_tgt, matched_src);
    if (!delta) break;
    result.transform = *delta * result.transform;
    result.iterations = iter + 1;

    double sum = 0.0;
    for (std::size_t i = 0; i < matched_src.size(); ++i)
      sum += (delta->apply(matched_src[i]) - matched_tgt[i]).norm();
    const double err = sum / static_cast<double>(matched_src.size());
    if (std::abs(prev_err - err) < cfg.tol) {
      result.converged = true;
      break;
    }
    prev_err = err;
  }

  // Final objective value by re-association at the returned transform, so
  // it matches an independent re-evaluation exactly.
  result.rmse = registration_error(src.points, tgt.points, tree,
                                   result.transform, cfg.max_corr_dist);
  if (!std::isfinite(result.rmse)) return std::nullopt;
  return result;
}

Vec6 noise_from_error(double err, double mean_range, double k_trans, double k_rot,
                      double floor_trans_sigma, double floor_rot_sigma) {
  const double trans_sigma = std::max(k_trans * err, floor_trans_sigma);
  const double range = std::max(mean_range, 1.0);
  const double rot_sigma = std::max(k_rot * err / range, floor_rot_sigma);
  Vec6 diag;
  diag << trans_sigma * trans_sigma, trans_sigma * trans_sigma,
      trans_sigma * trans_sigma, rot_sigma * rot_sigma, rot_sigma * rot_sigma,
      rot_sigma * rot_sigma;
  return diag;
}

std::optional<MultiplexResult> multiplex_icp(const PointCloud& source,
                                             const PointCloud& target,
                                             const Pose6& prev_estimate,
                                             const Pose6& prediction,
                                             const Mat6& predicted_cov,
                                             const IcpConfig& cfg) {
  const double sx = cfg.seed_scale * std::sqrt(std::max(predicted_cov(0, 0), 0.0));
  const double sy = cfg.seed_scale * std::sqrt(std::max(predicted_cov(1, 1), 0.0));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

  // Eight planar offsets on the predicted uncertainty ellipse: the axis
  // crossings plus the four diagonal points at 1/sqrt(2) scale.
  std::vector<std::pair<double, double>> offsets = {
      {+sx, 0.0}, {-sx, 0.0}, {0.0, +sy}, {0.0, -sy},
      {+sx * inv_sqrt2, +sy * inv_sqrt2}, {+sx * inv_sqrt2, -sy * inv_sqrt2},
      {-sx * inv_sqrt2, +sy * inv_sqrt2}, {-sx * inv_sqrt2, -sy * inv_sqrt2}};
  if (sx < 1e-12 && sy < 1e-12) offsets = {{0.0, 0.0}};

  std::vector<RigidTransform> seeds;
  seeds.reserve(offsets.size());
  for (const auto& [dx, dy] : offsets) {
    Pose6 shifted = prediction;
    shifted.x += dx;
    shifted.y += dy;
    seeds.push_back(relative(prev_estimate, shifted));
  }

  std::vector<std::optional<IcpResult>> results(seeds.size());
  const bool parallel =
      cfg.parallel_seeds && std::thread::hardware_concurrency() > 1 && seeds.size() > 1;
  if (parallel) {
    std::vector<std::future<std::optional<IcpResult>>> futures;
    futures.reserve(seeds.size());
    for (const auto& seed : seeds)
      futures.push_back(std::async(std::launch::async, [&, seed] {
        return icp_p2p(source, target, seed, cfg);
      }));
    for (std::size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < seeds.size(); ++i)
      results[i] = icp_p2p(source, target, seeds[i], cfg);
  }

  int best = -1;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i]) continue;
    if (best < 0 || results[i]->rmse < results[best]->rmse)
      best = static_cast<int>(i);
  }
  if (best < 0) return std::nullopt;

  MultiplexResult out;
  out.winner = *results[best];
  out.winner_seed = best;
  out.seeds_run = static_cast<int>(seeds.size());
  out.measurement.value = compose(prev_estimate, out.winner.transform);
  out.measurement.noise_diag = noise_from_error(
      out.winner.rmse, mean_range(target.points), cfg.k_trans, cfg.k_rot);
  out.measurement.source = MeasurementSource::PointToPoint;
  return out;
}

}  // namespace lodom
