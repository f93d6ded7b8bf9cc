#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lodom/geometry.hpp"

namespace lodom {

/// Raised on malformed scan/pose/calibration files.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parse a KITTI Velodyne .bin scan: packed little-endian float32
/// quadruples (x, y, z, reflectance). Reflectance is discarded; the
/// per-point phase is recovered from azimuth relative to the first point,
/// with the spin direction estimated from the azimuth trend.
PointCloud read_scan(const std::filesystem::path& path);

/// Write a cloud in the same .bin layout (reflectance written as 0).
void write_scan(const PointCloud& cloud, const std::filesystem::path& path);

/// Parse a KITTI pose file: one row-major 3x4 [R|t] (12 floats) per line.
std::vector<Pose6> read_poses(const std::filesystem::path& path);

/// Inverse of read_poses; read(write(x)) == x within 1e-9.
void write_trajectory(const std::vector<Pose6>& poses,
                      const std::filesystem::path& path);

/// Parse the `Tr:` line (12 floats, sensor-to-camera) of a KITTI calib file.
std::optional<RigidTransform> read_calibration(const std::filesystem::path& path);

/// A KITTI odometry sequence directory:
///   <dir>/velodyne/NNNNNN.bin   scans, contiguous from 000000
///   <dir>/poses.txt             optional ground truth
///   <dir>/calib.txt             optional, `Tr:` sensor->camera
///
/// The pipeline runs in the LiDAR frame: when a calibration is present the
/// camera-frame ground truth is conjugated into the LiDAR frame
/// (Tr^-1 * T_cam * Tr) so it is directly comparable with the estimate.
class SequenceSource {
 public:
  static SequenceSource open(const std::filesystem::path& dir,
                             double sweep_period = 0.1);

  std::size_t size() const { return scan_paths_.size(); }
  PointCloud scan(std::size_t index) const;
  const std::vector<Pose6>& ground_truth() const { return ground_truth_; }
  bool has_ground_truth() const { return !ground_truth_.empty(); }
  double sweep_period() const { return sweep_period_; }

 private:
  std::vector<std::filesystem::path> scan_paths_;
  std::vector<Pose6> ground_truth_;
  double sweep_period_ = 0.1;
};

}  // namespace lodom
