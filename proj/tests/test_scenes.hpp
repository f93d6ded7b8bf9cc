#pragma once

// Deterministic synthetic scenes shared by the registration tests.

#include <cmath>
#include <random>

#include "lodom/geometry.hpp"

namespace lodom::test {

/// Structured indoor-like scene: three mutually perpendicular planes plus a
/// slanted panel, ~5k points, slightly jittered off the grid so nearest
/// neighbors stay unambiguous under small rotations.
inline PointCloud structured_scene(std::uint32_t seed = 1234) {
  PointCloud cloud;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);

  auto add = [&](double x, double y, double z) {
    cloud.points.emplace_back(x + jitter(rng), y + jitter(rng), z + jitter(rng));
    cloud.phase.push_back(0.0);
  };

  for (double u = -8; u <= 8; u += 0.45)
    for (double v = 0; v <= 4; v += 0.45) add(10.0, u, v);   // wall x = 10
  for (double u = -8; u <= 8; u += 0.45)
    for (double v = 0; v <= 4; v += 0.45) add(u, 8.0, v);    // wall y = 8
  for (double u = -8; u <= 8; u += 0.6)
    for (double v = -8; v <= 8; v += 0.6) add(u, v, 0.0);    // ground
  for (double u = -6; u <= 0; u += 0.45)
    for (double v = 0; v <= 3; v += 0.45)
      add(u, -6.0 + 0.4 * u, v);                             // slanted panel
  for (std::size_t i = 0; i < cloud.size(); ++i)
    cloud.phase[i] = static_cast<double>(i) / cloud.size();
  return cloud;
}

/// Re-express the scene as seen after the vehicle moved by `motion`
/// (points get the inverse transform, like a real second scan).
inline PointCloud viewed_after_motion(const PointCloud& scene,
                                      const RigidTransform& motion) {
  return transform_cloud(scene, motion.inverse());
}

/// Periodic picket fence along x with distinct end posts: a textbook ICP
/// local-minimum trap with ~1 m period. Points are jittered off the
/// sampling grid, otherwise the point lattice itself creates half-cell
/// aliasing locks that mask the picket period.
inline PointCloud fence_scene() {
  PointCloud cloud;
  std::mt19937 rng(555);
  std::uniform_real_distribution<double> jitter(-0.025, 0.025);
  auto slab = [&](double x0, double width, double depth, double height,
                  double step) {
    for (double dx = 0; dx <= width + 1e-9; dx += step)
      for (double y = 0; y <= depth + 1e-9; y += step)
        for (double z = 0; z <= height + 1e-9; z += step) {
          cloud.points.emplace_back(x0 + dx + jitter(rng), y + jitter(rng),
                                    z + jitter(rng));
          cloud.phase.push_back(0.0);
        }
  };
  for (int k = 0; k < 10; ++k) slab(static_cast<double>(k), 0.08, 0.3, 1.2, 0.15);
  slab(-2.2, 0.2, 0.3, 1.0, 0.15);  // small end post: breaks the period tie without dominating the pull
  return cloud;
}

}  // namespace lodom::test
