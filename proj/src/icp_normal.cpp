#include "lodom/icp_normal.hpp"

#include <cmath>
#include <stdexcept>

#include "lodom/cloud_ops.hpp"
#include "lodom/kdtree.hpp"

namespace lodom {

NormalField estimate_normals(const std::vector<Vec3>& points, int k) {
  if (static_cast<int>(points.size()) < k + 1)
    throw std::invalid_argument("estimate_normals: need at least k+1 points");

  NormalField field;
  field.normals.assign(points.size(), Vec3::UnitZ());
  field.valid.assign(points.size(), 0);
  const KdTree tree(points);

  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto nbrs = tree.knearest(points[i], k + 1);  // includes the point
    Vec3 mean = Vec3::Zero();
    for (int idx : nbrs) mean += points[idx];
    mean /= static_cast<double>(nbrs.size());
    Mat3 cov = Mat3::Zero();
    for (int idx : nbrs) {
      const Vec3 d = points[idx] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 evals = eig.eigenvalues();  // ascending
    if (!(evals[2] > 0.0) || evals[1] <= 1e-8 * evals[2]) continue;  // collinear
    Vec3 n = eig.eigenvectors().col(0);
    if (n.dot(points[i]) > 0.0) n = -n;  // toward the sensor origin
    field.normals[i] = n;
    field.valid[i] = 1;
  }
  return field;
}

std::vector<int> filter_by_heading(const std::vector<Vec3>& points,
                                   const NormalField& normals, double heading,
                                   double sigma, const NormalIcpConfig& cfg) {
  const double band = std::max(sigma, cfg.sigma_floor);
  std::vector<double> centers = {heading, heading + M_PI};
  if (cfg.include_transverse) {
    centers.push_back(heading + M_PI / 2);
    centers.push_back(heading - M_PI / 2);
  }

  std::vector<int> kept;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!normals.valid[i]) continue;
    const Vec3& n = normals.normals[i];
    // Near-vertical normals (ground) have no meaningful azimuth and carry
    // no heading information; the band only constrains wall-like normals.
    if (std::hypot(n.x(), n.y()) < 0.35) {
      kept.push_back(static_cast<int>(i));
      continue;
    }
    const double az = std::atan2(n.y(), n.x());
    for (double c : centers) {
      if (std::abs(angle_diff(az, c)) <= band) {
        kept.push_back(static_cast<int>(i));
        break;
      }
    }
  }
  return kept;
}

std::optional<IcpResult> icp_p2plane(const std::vector<Vec3>& source,
                                     const std::vector<Vec3>& target,
                                     const NormalField& normals,
                                     const std::vector<int>& target_indices,
                                     const RigidTransform& seed,
                                     const NormalIcpConfig& cfg) {
  if (target_indices.empty()) return std::nullopt;

  std::vector<Vec3> sub_points;
  std::vector<Vec3> sub_normals;
  sub_points.reserve(target_indices.size());
  sub_normals.reserve(target_indices.size());
  for (int idx : target_indices) {
    if (!normals.valid[idx]) continue;
    sub_points.push_back(target[idx]);
    sub_normals.push_back(normals.normals[idx]);
  }
  if (sub_points.size() < 6) return std::nullopt;

  const KdTree tree(sub_points);
  const double gate_sq = cfg.max_corr_dist * cfg.max_corr_dist;
  // Rotational rows scale with range; normalize them for the rank check so
  // the eigenvalue ratio is unit-free.
  double range_sum = 0.0;
  for (const auto& p : sub_points) range_sum += p.norm();
  const double inv_range = 1.0 / std::max(range_sum / sub_points.size(), 1.0);

  auto evaluate = [&](const RigidTransform& t) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& p : source) {
      const Vec3 y = t.apply(p);
      double sq;
      const int idx = tree.nearest(y, sq);
      if (idx < 0 || sq > gate_sq) continue;
      sum += std::abs(sub_normals[idx].dot(y - sub_points[idx]));
      ++count;
    }
    return count == 0 ? std::numeric_limits<double>::infinity()
                      : sum / static_cast<double>(count);
  };

  IcpResult result;
  result.transform = seed;
  double prev_err = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    Mat6 ata = Mat6::Zero();
    Mat6 ata_scaled = Mat6::Zero();
    Vec6 atb = Vec6::Zero();
    double abs_sum = 0.0;
    std::size_t count = 0;
    for (const auto& p : source) {
      const Vec3 y = result.transform.apply(p);
      double sq;
      const int idx = tree.nearest(y, sq);
      if (idx < 0 || sq > gate_sq) continue;
      const Vec3& n = sub_normals[idx];
      const double e = n.dot(y - sub_points[idx]);
      Vec6 row;
      row.head<3>() = y.cross(n);
      row.tail<3>() = n;
      ata += row * row.transpose();
      atb += row * (-e);
      Vec6 scaled = row;
      scaled.head<3>() *= inv_range;
      ata_scaled += scaled * scaled.transpose();
      abs_sum += std::abs(e);
      ++count;
    }
    if (count < 6) break;

    Eigen::SelfAdjointEigenSolver<Mat6> eig(ata_scaled);
    if (eig.eigenvalues()[0] <= cfg.degeneracy_ratio * eig.eigenvalues()[5])
      return std::nullopt;  // unobservable direction (e.g. parallel normals)

    const Vec6 xi = ata.ldlt().solve(atb);
    const Vec3 omega = xi.head<3>();
    RigidTransform delta;
    const double angle = omega.norm();
    delta.rotation = angle < 1e-14
                         ? Mat3::Identity()
                         : Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix();
    delta.translation = xi.tail<3>();
    result.transform = delta * result.transform;
    result.iterations = iter + 1;

    const double err = abs_sum / static_cast<double>(count);
    if (std::abs(prev_err - err) < cfg.tol) {
      result.converged = true;
      break;
    }
    prev_err = err;
  }

  result.rmse = evaluate(result.transform);
  if (!std::isfinite(result.rmse)) return std::nullopt;
  return result;
}

std::optional<NormalIcpResult> p2plane_measure(const PointCloud& source,
                                               const PointCloud& target,
                                               const Pose6& prev_estimate,
                                               const Pose6& prediction,
                                               const Mat6& predicted_cov,
                                               const NormalIcpConfig& cfg) {
  if (source.size() < cfg.min_points || target.size() < cfg.min_points)
    return std::nullopt;

  const PointCloud src = voxel_downsample(source, cfg.voxel);
  const PointCloud tgt = voxel_downsample(target, cfg.voxel);
  if (static_cast<int>(tgt.points.size()) < cfg.k_neighbors + 1) return std::nullopt;

  if (static_cast<int>(src.points.size()) < cfg.k_neighbors + 1) return std::nullopt;
  const NormalField normals = estimate_normals(tgt.points, cfg.k_neighbors);
  // The band must cut both clouds symmetrically: an unfiltered source
  // point whose structure was removed from the target would latch onto an
  // unrelated target point and poison the solve.
  const NormalField src_normals = estimate_normals(src.points, cfg.k_neighbors);

  // Band center: the predicted heading expressed in the target frame.
  const double heading = angle_diff(prediction.yaw, prev_estimate.yaw);
  const double sigma = std::sqrt(std::max(predicted_cov(5, 5), 0.0));
  std::vector<int> kept = filter_by_heading(tgt.points, normals, heading, sigma, cfg);
  std::vector<int> src_kept =
      filter_by_heading(src.points, src_normals, heading, sigma, cfg);

  NormalIcpResult out;
  const RigidTransform seed = relative(prev_estimate, prediction);

  auto gather_source = [&](const std::vector<int>& indices) {
    std::vector<Vec3> pts;
    pts.reserve(indices.size());
    for (int i : indices) pts.push_back(src.points[i]);
    return pts;
  };
  auto run_unfiltered = [&]() {
    out.used_fallback = true;
    kept.clear();
    for (std::size_t i = 0; i < tgt.points.size(); ++i)
      if (normals.valid[i]) kept.push_back(static_cast<int>(i));
    out.filtered_points = kept.size();
    return icp_p2plane(src.points, tgt.points, normals, kept, seed, cfg);
  };

  std::optional<IcpResult> icp;
  if (kept.size() < cfg.min_points || src_kept.size() < cfg.min_points) {
    icp = run_unfiltered();
  } else {
    out.filtered_points = kept.size();
    icp = icp_p2plane(gather_source(src_kept), tgt.points, normals, kept, seed, cfg);
    // The band can also starve the geometry of whole directions (e.g. a
    // street with only longitudinal facades); retry on the full set.
    if (!icp) icp = run_unfiltered();
  }
  if (!icp) return std::nullopt;

  out.icp = *icp;
  out.measurement.value = compose(prev_estimate, icp->transform);
  out.measurement.noise_diag = noise_from_error(
      icp->rmse, mean_range(target.points), cfg.k_trans, cfg.k_rot);
  out.measurement.source = MeasurementSource::PointToPlane;
  return out;
}

}  // namespace lodom
