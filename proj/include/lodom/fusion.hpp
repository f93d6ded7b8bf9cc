#pragma once

#include <optional>
#include <vector>

#include "lodom/geometry.hpp"
#include "lodom/measurement.hpp"

namespace lodom {

/// Ellipse-gated measurement weight against the prediction:
///   d^2 = (z_x - x_x)^2 / P(0,0) + (z_y - x_y)^2 / P(1,1)
/// w = |sqrt(d^2) - 1| inside the 1-sigma ellipse (d^2 <= 1), else 0.
double fusion_weight(const Measurement& z, const Pose6& prediction,
                     const Mat6& predicted_cov);

/// Weighted mean of the measurements anchored at the prediction, applied
/// component-wise with circular handling of the angles; the fused noise
/// diagonal is the weight-averaged diagonal. Returns nullopt when every
/// weight is zero (all measurements rejected: no update this cycle).
/// Weights are written back into `measurements`.
std::optional<Measurement> fuse(std::vector<Measurement>& measurements,
                                const Pose6& prediction,
                                const Mat6& predicted_cov);

}  // namespace lodom
