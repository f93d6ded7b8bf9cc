#include "lodom/corner_svd.hpp"

#include <cmath>
#include <map>
#include <queue>
#include <random>
#include <unordered_map>

#include "lodom/icp_point.hpp"

namespace lodom {

namespace {

struct CellKey {
  int x, y;
  bool operator<(const CellKey& o) const {
    return x != o.x ? x < o.x : y < o.y;
  }
};

struct PlaneFit {
  Eigen::Vector4d plane;      // unit normal + offset
  std::vector<int> inliers;   // indices into the cluster
  double rmse = 0.0;
};

double plane_distance(const Eigen::Vector4d& plane, const Vec3& p) {
  return std::abs(plane.head<3>().dot(p) + plane[3]);
}

/// Least-squares plane through the given subset (PCA refit).
Eigen::Vector4d refit_plane(const std::vector<Vec3>& points,
                            const std::vector<int>& subset) {
  Vec3 mean = Vec3::Zero();
  for (int idx : subset) mean += points[idx];
  mean /= static_cast<double>(subset.size());
  Mat3 cov = Mat3::Zero();
  for (int idx : subset) {
    const Vec3 d = points[idx] - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 n = eig.eigenvectors().col(0);
  Eigen::Vector4d plane;
  plane.head<3>() = n;
  plane[3] = -n.dot(mean);
  return plane;
}

/// Sequential RANSAC plane over `subset`: candidates from 3-point draws,
/// consensus on a random quarter of the subset, PCA refit over all subset
/// inliers. Only near-vertical planes are admitted.
std::optional<PlaneFit> ransac_vertical_plane(const std::vector<Vec3>& points,
                                              const std::vector<int>& subset,
                                              const CornerConfig& cfg,
                                              std::mt19937_64& rng) {
  if (subset.size() < 12) return std::nullopt;

  // Quarter-subsample used to score candidates.
  std::vector<int> score_set = subset;
  std::shuffle(score_set.begin(), score_set.end(), rng);
  const std::size_t quarter = std::max<std::size_t>(subset.size() / 4, 12);
  if (score_set.size() > quarter) score_set.resize(quarter);

  std::uniform_int_distribution<std::size_t> pick(0, subset.size() - 1);
  Eigen::Vector4d best_plane = Eigen::Vector4d::Zero();
  int best_count = 0;

  for (int iter = 0; iter < cfg.ransac_iterations; ++iter) {
    const Vec3& a = points[subset[pick(rng)]];
    const Vec3& b = points[subset[pick(rng)]];
    const Vec3& c = points[subset[pick(rng)]];
    Vec3 n = (b - a).cross(c - a);
    const double norm = n.norm();
    if (norm < 1e-12) continue;
    n /= norm;
    if (std::abs(n.z()) > cfg.max_normal_z) continue;

    Eigen::Vector4d plane;
    plane.head<3>() = n;
    plane[3] = -n.dot(a);
    int count = 0;
    for (int idx : score_set)
      if (plane_distance(plane, points[idx]) <= cfg.ransac_inlier_dist) ++count;
    if (count > best_count) {
      best_count = count;
      best_plane = plane;
    }
  }
  if (best_count < static_cast<int>(score_set.size()) / 4) return std::nullopt;

  PlaneFit fit;
  for (int idx : subset)
    if (plane_distance(best_plane, points[idx]) <= cfg.ransac_inlier_dist)
      fit.inliers.push_back(idx);
  if (fit.inliers.size() < 12) return std::nullopt;

  fit.plane = refit_plane(points, fit.inliers);
  if (std::abs(fit.plane[2]) > cfg.max_normal_z) return std::nullopt;

  double sq_sum = 0.0;
  for (int idx : fit.inliers) {
    const double d = plane_distance(fit.plane, points[idx]);
    sq_sum += d * d;
  }
  fit.rmse = std::sqrt(sq_sum / static_cast<double>(fit.inliers.size()));
  return fit;
}

double normal_azimuth_alignment(const Vec3& n, double heading) {
  const double az = std::atan2(n.y(), n.x());
  return std::min(std::abs(angle_diff(az, heading)),
                  std::abs(angle_diff(az + M_PI, heading)));
}

}  // namespace

std::vector<int> detect_vertical_points(const PointCloud& cloud,
                                        const CornerConfig& cfg) {
  struct CellStats {
    std::vector<int> indices;
    double z_min = std::numeric_limits<double>::infinity();
    double z_max = -std::numeric_limits<double>::infinity();
  };
  std::map<CellKey, CellStats> grid;
  const double inv = 1.0 / cfg.cell_size;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    CellKey key{static_cast<int>(std::floor(p.x() * inv)),
                static_cast<int>(std::floor(p.y() * inv))};
    auto& cell = grid[key];
    cell.indices.push_back(static_cast<int>(i));
    cell.z_min = std::min(cell.z_min, p.z());
    cell.z_max = std::max(cell.z_max, p.z());
  }

  std::vector<int> out;
  for (const auto& [key, cell] : grid) {
    if (static_cast<int>(cell.indices.size()) < cfg.count_threshold) continue;
    if (cell.z_max - cell.z_min < cfg.min_vertical_extent) continue;
    out.insert(out.end(), cell.indices.begin(), cell.indices.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<int>> cluster(const std::vector<Vec3>& points,
                                      const CornerConfig& cfg) {
  const std::size_t n = points.size();
  if (n == 0) return {};

  // eps-sized grid hash for neighbor queries
  const double inv = 1.0 / cfg.cluster_eps;
  std::unordered_map<std::int64_t, std::vector<int>> cells;
  auto key_of = [&](const Vec3& p) {
    const auto qx = static_cast<std::int64_t>(std::floor(p.x() * inv));
    const auto qy = static_cast<std::int64_t>(std::floor(p.y() * inv));
    const auto qz = static_cast<std::int64_t>(std::floor(p.z() * inv));
    return ((qx + (1 << 20)) << 42) | ((qy + (1 << 20)) << 21) | (qz + (1 << 20));
  };
  for (std::size_t i = 0; i < n; ++i)
    cells[key_of(points[i])].push_back(static_cast<int>(i));

  const double eps_sq = cfg.cluster_eps * cfg.cluster_eps;
  auto neighbors_of = [&](int i, std::vector<int>& out) {
    out.clear();
    const Vec3& p = points[i];
    const auto cx = static_cast<std::int64_t>(std::floor(p.x() * inv));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y() * inv));
    const auto cz = static_cast<std::int64_t>(std::floor(p.z() * inv));
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto key = ((cx + dx + (1 << 20)) << 42) |
                           ((cy + dy + (1 << 20)) << 21) | (cz + dz + (1 << 20));
          const auto it = cells.find(key);
          if (it == cells.end()) continue;
          for (int j : it->second)
            if ((points[j] - p).squaredNorm() <= eps_sq) out.push_back(j);
        }
  };

  // DBSCAN; the point itself counts toward min_samples.
  constexpr int kUnvisited = -2, kNoise = -1;
  std::vector<int> label(n, kUnvisited);
  std::vector<std::vector<int>> clusters;
  std::vector<int> nbrs, nbrs2;

  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnvisited) continue;
    neighbors_of(static_cast<int>(i), nbrs);
    if (static_cast<int>(nbrs.size()) < cfg.cluster_min_samples) {
      label[i] = kNoise;
      continue;
    }
    const int cid = static_cast<int>(clusters.size());
    clusters.emplace_back();
    label[i] = cid;
    clusters[cid].push_back(static_cast<int>(i));
    std::queue<int> frontier;
    for (int j : nbrs)
      if (label[j] == kUnvisited || label[j] == kNoise) {
        if (label[j] == kUnvisited) frontier.push(j);
        label[j] = cid;
        if (j != static_cast<int>(i)) clusters[cid].push_back(j);
      }
    while (!frontier.empty()) {
      const int j = frontier.front();
      frontier.pop();
      neighbors_of(j, nbrs2);
      if (static_cast<int>(nbrs2.size()) < cfg.cluster_min_samples) continue;
      for (int k : nbrs2) {
        if (label[k] == cid) continue;
        if (label[k] == kUnvisited) frontier.push(k);
        if (label[k] == kUnvisited || label[k] == kNoise) {
          label[k] = cid;
          clusters[cid].push_back(k);
        }
      }
    }
  }

  std::vector<std::vector<int>> kept;
  for (auto& c : clusters) {
    if (static_cast<int>(c.size()) < cfg.min_cluster_size) continue;
    std::sort(c.begin(), c.end());
    kept.push_back(std::move(c));
  }
  return kept;
}

std::optional<CornerFeature> fit_corner(const std::vector<Vec3>& cluster_points,
                                        const CornerConfig& cfg, double heading,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> all(cluster_points.size());
  std::iota(all.begin(), all.end(), 0);

  const auto first = ransac_vertical_plane(cluster_points, all, cfg, rng);
  if (!first) return std::nullopt;

  std::vector<std::uint8_t> is_inlier(cluster_points.size(), 0);
  for (int idx : first->inliers) is_inlier[idx] = 1;
  std::vector<int> outliers;
  for (std::size_t i = 0; i < cluster_points.size(); ++i)
    if (!is_inlier[i]) outliers.push_back(static_cast<int>(i));

  const auto second = ransac_vertical_plane(cluster_points, outliers, cfg, rng);
  if (!second) return std::nullopt;

  const Vec3 n1 = first->plane.head<3>();
  const Vec3 n2 = second->plane.head<3>();
  const double plane_angle = std::acos(std::clamp(std::abs(n1.dot(n2)), 0.0, 1.0));
  if (plane_angle <= cfg.angle_min_deg * M_PI / 180.0) return std::nullopt;
  // (the complementary bound cfg.angle_max_deg is implied: the unsigned
  // plane angle never exceeds 90 degrees)

  Vec3 dir = n1.cross(n2);
  const double dir_norm = dir.norm();
  if (dir_norm < 1e-9) return std::nullopt;
  dir /= dir_norm;
  if (std::abs(dir.z()) < 0.5) return std::nullopt;  // corner line not vertical
  if (dir.z() < 0.0) dir = -dir;

  // Point on the intersection line closest to the origin, then slide to z = 0.
  Mat3 a;
  a.row(0) = n1.transpose();
  a.row(1) = n2.transpose();
  a.row(2) = dir.transpose();
  const Vec3 rhs(-first->plane[3], -second->plane[3], 0.0);
  Vec3 base = a.partialPivLu().solve(rhs);
  base -= (base.z() / dir.z()) * dir;
  base.z() = 0.0;

  // Reference plane: the one whose direction is most longitudinal.
  const bool first_is_ref = normal_azimuth_alignment(n1, heading) <=
                            normal_azimuth_alignment(n2, heading);
  const Eigen::Vector4d& ref = first_is_ref ? first->plane : second->plane;
  const Vec3 nr = ref.head<3>();
  Vec3 u(-nr.y(), nr.x(), 0.0);  // horizontal, in the reference plane
  const double u_norm = u.norm();
  if (u_norm < 1e-9) return std::nullopt;
  u /= u_norm;
  const Vec3 h(std::cos(heading), std::sin(heading), 0.0);
  const double along = u.dot(h);
  if (std::abs(along) > 0.17) {
    if (along < 0.0) u = -u;
  } else if (u.dot(Vec3(-h.y(), h.x(), 0.0)) < 0.0) {
    u = -u;  // transverse wall: orient by the left-hand direction instead
  }

  CornerFeature corner;
  corner.m = base;
  corner.j = base + 0.5 * dir;
  corner.n = base + u;
  corner.plane_a = first_is_ref ? first->plane : second->plane;
  corner.plane_b = first_is_ref ? second->plane : first->plane;
  const double w1 = static_cast<double>(first->inliers.size());
  const double w2 = static_cast<double>(second->inliers.size());
  corner.fit_rmse = std::sqrt((w1 * first->rmse * first->rmse +
                               w2 * second->rmse * second->rmse) / (w1 + w2));
  return corner;
}

std::vector<CornerFeature> extract_corners(const PointCloud& cloud,
                                           const CornerConfig& cfg,
                                           double heading) {
  const auto candidate_idx = detect_vertical_points(cloud, cfg);
  std::vector<Vec3> candidates;
  candidates.reserve(candidate_idx.size());
  const double range_sq = cfg.max_range * cfg.max_range;
  for (int idx : candidate_idx) {
    if (cloud.points[idx].squaredNorm() <= range_sq)
      candidates.push_back(cloud.points[idx]);
  }

  const auto clusters = cluster(candidates, cfg);
  std::vector<CornerFeature> corners;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    std::vector<Vec3> pts;
    pts.reserve(clusters[c].size());
    for (int idx : clusters[c]) pts.push_back(candidates[idx]);
    const std::uint64_t seed = cfg.seed ^ (0x9E3779B97F4A7C15ull * (c + 1));
    if (auto corner = fit_corner(pts, cfg, heading, seed)) corners.push_back(*corner);
  }
  return corners;
}

std::vector<std::pair<int, int>> associate(const std::vector<CornerFeature>& a,
                                           const std::vector<CornerFeature>& b,
                                           const CornerConfig& cfg) {
  std::vector<std::pair<int, int>> pairs;
  if (a.empty() || b.empty()) return pairs;

  auto nearest = [](const Vec3& p, const std::vector<CornerFeature>& set) {
    int best = -1;
    double best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < set.size(); ++i) {
      const double sq = (set[i].m - p).squaredNorm();
      if (sq < best_sq) {
        best_sq = sq;
        best = static_cast<int>(i);
      }
    }
    return std::pair<int, double>(best, best_sq);
  };

  const double gate_sq = cfg.assoc_max_dist * cfg.assoc_max_dist;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto [j, sq] = nearest(a[i].m, b);
    if (j < 0 || sq >= gate_sq) continue;
    const auto [back, back_sq] = nearest(b[j].m, a);
    (void)back_sq;
    if (back == static_cast<int>(i)) pairs.emplace_back(static_cast<int>(i), j);
  }
  return pairs;
}

std::optional<RigidTransform> svd_transform(const std::vector<Vec3>& x,
                                            const std::vector<Vec3>& y) {
  if (x.size() != y.size() || x.size() < 3) return std::nullopt;

  Vec3 mean_x = Vec3::Zero(), mean_y = Vec3::Zero();
  for (std::size_t i = 0; i < x.size(); ++i) {
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= static_cast<double>(x.size());
  mean_y /= static_cast<double>(y.size());

  Mat3 w = Mat3::Zero();
  for (std::size_t i = 0; i < x.size(); ++i)
    w += (x[i] - mean_x) * (y[i] - mean_y).transpose();

  Eigen::JacobiSVD<Mat3> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  if (s[1] <= 1e-12 * std::max(s[0], 1e-300)) return std::nullopt;  // collinear

  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  RigidTransform t;
  t.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  t.translation = mean_x - t.rotation * mean_y;
  return t;
}

Measurement svd_measure(const RigidTransform& delta,
                        const std::vector<double>& fit_rmses,
                        const Pose6& prediction, const CornerConfig& cfg,
                        double range_scale) {
  double rmse = 0.0;
  for (double r : fit_rmses) rmse += r;
  if (!fit_rmses.empty()) rmse /= static_cast<double>(fit_rmses.size());

  Measurement m;
  m.value = compose(prediction, delta);
  m.noise_diag = noise_from_error(rmse, range_scale, cfg.k_trans, cfg.k_rot);
  m.source = MeasurementSource::CornerSvd;
  return m;
}

}  // namespace lodom
