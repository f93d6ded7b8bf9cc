#pragma once

#include "lodom/geometry.hpp"

namespace lodom {

/// Replace each occupied voxel of size `voxel` by the centroid of its
/// points (phase averaged alongside). voxel <= 0 returns the input.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

/// Mean distance of the points from the frame origin (0 for empty clouds).
double mean_range(const std::vector<Vec3>& points);

/// Uniform stride subsample down to at most max_points (order preserved).
PointCloud stride_sample(const PointCloud& cloud, std::size_t max_points);

}  // namespace lodom
