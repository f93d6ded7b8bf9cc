#pragma once

#include <array>
#include <functional>

#include "lodom/geometry.hpp"
#include "lodom/measurement.hpp"

namespace lodom {

struct UkfParams {
  double alpha = 1e-3;
  double beta = 2.0;
  double kappa = 0.0;
};

/// Scaled (Merwe) sigma points for a 6-dimensional state: 2n+1 = 13 points
/// with separate mean and covariance weights. Mean weights sum to 1.
struct SigmaPointSet {
  std::array<Vec6, 13> points;
  std::array<double, 13> mean_weights;
  std::array<double, 13> cov_weights;
};

/// Build the sigma-point set for (mean, cov). A covariance whose Cholesky
/// factorization fails is jittered once by 1e-9 I; a second failure throws.
SigmaPointSet sigma_points(const Pose6& mean, const Mat6& cov,
                           const UkfParams& params = {});

/// Weighted mean of sigma points with circular averaging of the three
/// angle components; used by predict and exposed for tests.
Vec6 sigma_mean(const SigmaPointSet& set);

/// Weighted covariance of sigma points about `mean` with wrapped angle
/// residuals.
Mat6 sigma_covariance(const SigmaPointSet& set, const Vec6& mean);

struct FilterState {
  Pose6 estimate;           // x_hat
  Mat6 covariance = Mat6::Identity();        // P
  Pose6 prediction;         // x_tilde (last prediction)
  Mat6 predicted_covariance = Mat6::Identity();  // P_tilde
  double t = 0.0;
};

class Ukf {
 public:
  explicit Ukf(UkfParams params = {}) : params_(params) {}

  /// Propagate each sigma point of (estimate, P) through the nonlinear
  /// transition, recombine with circular means, add Q.
  FilterState predict(const FilterState& state,
                      const std::function<Pose6(const Pose6&)>& transition,
                      const Mat6& process_noise, double dt) const;

  /// Measurement update with the identity observation model. The noise
  /// diagonal must be strictly positive. Angle innovations are wrapped.
  FilterState update(const FilterState& state, const Measurement& z) const;

  const UkfParams& params() const { return params_; }

 private:
  UkfParams params_;
};

}  // namespace lodom
