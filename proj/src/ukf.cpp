#include "lodom/ukf.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

namespace lodom {

namespace {

constexpr int kDim = 6;
constexpr int kAngleBegin = 3;  // components 3..5 are roll/pitch/yaw

Vec6 wrap_residual(const Vec6& v, const Vec6& reference) {
  Vec6 r = v - reference;
  for (int j = kAngleBegin; j < kDim; ++j) r[j] = wrap_pi(r[j]);
  return r;
}

}  // namespace

SigmaPointSet sigma_points(const Pose6& mean, const Mat6& cov,
                           const UkfParams& params) {
  const double lambda =
      params.alpha * params.alpha * (kDim + params.kappa) - kDim;
  const double scale = kDim + lambda;

  // Matrix square root through the eigendecomposition: exact for singular
  // PSD input (a zero covariance collapses every point onto the mean),
  // where a plain Cholesky would fail.
  auto try_root = [&](const Mat6& m) -> std::optional<Mat6> {
    Eigen::SelfAdjointEigenSolver<Mat6> eig(symmetrized(m));
    if (eig.eigenvalues()[0] < -1e-9) return std::nullopt;
    const Vec6 clamped = eig.eigenvalues().cwiseMax(0.0);
    return Mat6(eig.eigenvectors() *
                (scale * clamped).cwiseSqrt().asDiagonal() *
                eig.eigenvectors().transpose());
  };
  std::optional<Mat6> root_opt = try_root(cov);
  if (!root_opt) root_opt = try_root(cov + 1e-9 * Mat6::Identity());
  if (!root_opt) throw std::runtime_error("sigma_points: covariance is not PSD");
  const Mat6 root = *root_opt;

  SigmaPointSet set;
  const Vec6 center = mean.to_vector();
  set.points[0] = center;
  set.mean_weights[0] = lambda / scale;
  set.cov_weights[0] =
      lambda / scale + (1.0 - params.alpha * params.alpha + params.beta);
  const double w = 0.5 / scale;
  for (int i = 0; i < kDim; ++i) {
    set.points[1 + i] = center + root.col(i);
    set.points[1 + kDim + i] = center - root.col(i);
    set.mean_weights[1 + i] = set.mean_weights[1 + kDim + i] = w;
    set.cov_weights[1 + i] = set.cov_weights[1 + kDim + i] = w;
  }
  return set;
}

Vec6 sigma_mean(const SigmaPointSet& set) {
  Vec6 mean = Vec6::Zero();
  for (int j = 0; j < kAngleBegin; ++j) {
    double acc = 0.0;
    for (int i = 0; i < 13; ++i) acc += set.mean_weights[i] * set.points[i][j];
    mean[j] = acc;
  }
  for (int j = kAngleBegin; j < kDim; ++j) {
    double s = 0.0, c = 0.0;
    for (int i = 0; i < 13; ++i) {
      s += set.mean_weights[i] * std::sin(set.points[i][j]);
      c += set.mean_weights[i] * std::cos(set.points[i][j]);
    }
    mean[j] = std::atan2(s, c);
  }
  return mean;
}

Mat6 sigma_covariance(const SigmaPointSet& set, const Vec6& mean) {
  Mat6 cov = Mat6::Zero();
  for (int i = 0; i < 13; ++i) {
    const Vec6 r = wrap_residual(set.points[i], mean);
    cov += set.cov_weights[i] * (r * r.transpose());
  }
  return symmetrized(cov);
}

FilterState Ukf::predict(const FilterState& state,
                         const std::function<Pose6(const Pose6&)>& transition,
                         const Mat6& process_noise, double dt) const {
  if (!(dt > 0.0)) throw std::invalid_argument("predict: dt must be > 0");

  SigmaPointSet set = sigma_points(state.estimate, state.covariance, params_);
  for (auto& point : set.points)
    point = transition(Pose6::from_vector(point)).to_vector();

  const Vec6 mean = sigma_mean(set);
  FilterState out = state;
  out.prediction = Pose6::from_vector(mean);
  out.predicted_covariance =
      symmetrized(sigma_covariance(set, mean) + process_noise);
  out.t = state.t + dt;
  return out;
}

FilterState Ukf::update(const FilterState& state, const Measurement& z) const {
  if ((z.noise_diag.array() <= 0.0).any())
    throw std::invalid_argument("update: measurement noise diagonal must be > 0");

  // With the identity observation model the unscented update reduces
  // exactly to the Kalman form; the Joseph form keeps P symmetric PSD.
  const Mat6 r = z.noise_diag.asDiagonal();
  const Mat6 innovation_cov = state.predicted_covariance + r;
  const Mat6 gain = state.predicted_covariance *
                    innovation_cov.ldlt().solve(Mat6::Identity());

  const Vec6 innovation =
      wrap_residual(z.value.to_vector(), state.prediction.to_vector());
  const Vec6 updated = state.prediction.to_vector() + gain * innovation;

  FilterState out = state;
  out.estimate = Pose6::from_vector(updated);
  const Mat6 ikh = Mat6::Identity() - gain;
  out.covariance = symmetrized(ikh * state.predicted_covariance * ikh.transpose() +
                               gain * r * gain.transpose());
  return out;
}

}  // namespace lodom
