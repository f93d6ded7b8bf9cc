#pragma once

#include <string>

#include "lodom/geometry.hpp"

namespace lodom {

enum class MeasurementSource { PointToPoint, PointToPlane, CornerSvd, Fused };

std::string to_string(MeasurementSource source);

/// A 6-DoF absolute pose observation with a diagonal noise covariance.
/// `weight` is assigned by the fusion stage (0 = rejected by the gate).
struct Measurement {
  Pose6 value;
  Vec6 noise_diag = Vec6::Ones();  // variances, all > 0
  double weight = 0.0;
  MeasurementSource source = MeasurementSource::Fused;
};

}  // namespace lodom
