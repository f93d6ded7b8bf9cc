#include "lodom/fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace lodom {

std::string to_string(MeasurementSource source) {
  switch (source) {
    case MeasurementSource::PointToPoint: return "p2p";
    case MeasurementSource::PointToPlane: return "p2plane";
    case MeasurementSource::CornerSvd: return "svd";
    case MeasurementSource::Fused: return "fused";
  }
  return "?";
}

double fusion_weight(const Measurement& z, const Pose6& prediction,
                     const Mat6& predicted_cov) {
  const double var_x = predicted_cov(0, 0);
  const double var_y = predicted_cov(1, 1);
  if (!(var_x > 0.0) || !(var_y > 0.0))
    throw std::invalid_argument("fusion_weight: predicted (x, y) variances must be > 0");

  const double dx = z.value.x - prediction.x;
  const double dy = z.value.y - prediction.y;
  const double d_sq = dx * dx / var_x + dy * dy / var_y;
  if (d_sq > 1.0) return 0.0;
  return std::abs(std::sqrt(d_sq) - 1.0);
}

std::optional<Measurement> fuse(std::vector<Measurement>& measurements,
                                const Pose6& prediction,
                                const Mat6& predicted_cov) {
  if (measurements.empty()) return std::nullopt;

  double weight_sum = 0.0;
  for (auto& m : measurements) {
    m.weight = fusion_weight(m, prediction, predicted_cov);
    weight_sum += m.weight;
  }
  if (weight_sum <= 0.0) return std::nullopt;

  Vec6 delta = Vec6::Zero();
  Vec6 noise = Vec6::Zero();
  const Vec6 anchor = prediction.to_vector();
  for (const auto& m : measurements) {
    if (m.weight <= 0.0) continue;  // zero-weight terms must not perturb bits
    Vec6 r = m.value.to_vector() - anchor;
    for (int j = 3; j < 6; ++j) r[j] = wrap_pi(r[j]);
    delta += m.weight * r;
    noise += m.weight * m.noise_diag;
  }
  delta /= weight_sum;
  noise /= weight_sum;

  Measurement fused;
  fused.value = Pose6::from_vector(anchor + delta);
  fused.noise_diag = noise;
  fused.weight = 1.0;
  fused.source = MeasurementSource::Fused;
  return fused;
}

}  // namespace lodom
