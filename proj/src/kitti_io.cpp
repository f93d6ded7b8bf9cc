#include "lodom/kitti_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lodom {

namespace {

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return data;
}

/// Phase from azimuth: fraction of the sweep swept at capture, using the
/// first point as phase 0. Azimuth is the only per-point timing proxy in
/// KITTI scans, so this is an approximation of true capture time.
void compute_phase(PointCloud& cloud) {
  const std::size_t n = cloud.points.size();
  cloud.phase.assign(n, 0.0);
  if (n < 2) return;

  std::vector<double> azimuth(n);
  for (std::size_t i = 0; i < n; ++i)
    azimuth[i] = std::atan2(cloud.points[i].y(), cloud.points[i].x());

  // Spin direction from the majority of successive azimuth deltas.
  double trend = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    double d = wrap_pi(azimuth[i] - azimuth[i - 1]);
    if (std::abs(d) < M_PI / 2) trend += d;
  }
  const double sign = trend < 0.0 ? -1.0 : 1.0;

  const double az0 = azimuth[0];
  for (std::size_t i = 0; i < n; ++i) {
    double rel = sign * (azimuth[i] - az0);
    rel = rel - 2.0 * M_PI * std::floor(rel / (2.0 * M_PI));
    cloud.phase[i] = rel / (2.0 * M_PI);
  }
}

}  // namespace

PointCloud read_scan(const std::filesystem::path& path) {
  const auto data = read_all(path);
  if (data.size() % 16 != 0)
    throw FormatError(path.string() + ": size " + std::to_string(data.size()) +
                      " is not a multiple of 16 bytes");
  PointCloud cloud;
  const std::size_t n = data.size() / 16;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    float v[4];
    std::memcpy(v, data.data() + 16 * i, 16);
    cloud.points.emplace_back(v[0], v[1], v[2]);  // reflectance v[3] dropped
  }
  compute_phase(cloud);
  return cloud;
}

void write_scan(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& p : cloud.points) {
    float v[4] = {static_cast<float>(p.x()), static_cast<float>(p.y()),
                  static_cast<float>(p.z()), 0.0f};
    out.write(reinterpret_cast<const char*>(v), 16);
  }
}

std::vector<Pose6> read_poses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<Pose6> poses;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    double v[12];
    for (int k = 0; k < 12; ++k) {
      if (!(ss >> v[k]))
        throw FormatError(path.string() + ":" + std::to_string(lineno) +
                          ": expected 12 numeric fields");
    }
    RigidTransform t;
    t.rotation << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    t.translation << v[3], v[7], v[11];
    poses.push_back(transform_to_pose(t));
  }
  return poses;
}

void write_trajectory(const std::vector<Pose6>& poses,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[64];
  for (const auto& pose : poses) {
    const RigidTransform t = pose_to_transform(pose);
    double v[12] = {t.rotation(0, 0), t.rotation(0, 1), t.rotation(0, 2), t.translation.x(),
                    t.rotation(1, 0), t.rotation(1, 1), t.rotation(1, 2), t.translation.y(),
                    t.rotation(2, 0), t.rotation(2, 1), t.rotation(2, 2), t.translation.z()};
    for (int k = 0; k < 12; ++k) {
      std::snprintf(buf, sizeof(buf), "%.15g", v[k]);
      out << buf << (k == 11 ? '\n' : ' ');
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::optional<RigidTransform> read_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("Tr:", 0) != 0) continue;
    std::istringstream ss(line.substr(3));
    double v[12];
    for (int k = 0; k < 12; ++k) {
      if (!(ss >> v[k])) throw FormatError(path.string() + ": malformed Tr line");
    }
    RigidTransform t;
    t.rotation << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    t.translation << v[3], v[7], v[11];
    return t;
  }
  return std::nullopt;
}

SequenceSource SequenceSource::open(const std::filesystem::path& dir,
                                    double sweep_period) {
  SequenceSource src;
  src.sweep_period_ = sweep_period;

  const auto velo = dir / "velodyne";
  if (!std::filesystem::is_directory(velo))
    throw FormatError("no velodyne/ directory under " + dir.string());
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(velo)) {
    if (entry.path().extension() == ".bin") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    char expect[16];
    std::snprintf(expect, sizeof(expect), "%06zu", i);
    if (paths[i].stem().string() != expect)
      throw FormatError("scan indices not contiguous from 0 in " + velo.string());
  }
  src.scan_paths_ = std::move(paths);

  const auto pose_file = dir / "poses.txt";
  if (std::filesystem::exists(pose_file)) {
    auto gt = read_poses(pose_file);
    if (gt.size() != src.scan_paths_.size())
      throw FormatError("ground-truth pose count (" + std::to_string(gt.size()) +
                        ") != scan count (" + std::to_string(src.scan_paths_.size()) + ")");
    const auto calib = read_calibration(dir / "calib.txt");
    if (calib) {
      // Ground truth is camera-frame; conjugate into the LiDAR frame.
      const RigidTransform tr = *calib;
      const RigidTransform tr_inv = tr.inverse();
      for (auto& pose : gt)
        pose = transform_to_pose(tr_inv * pose_to_transform(pose) * tr);
    }
    src.ground_truth_ = std::move(gt);
  }
  return src;
}

PointCloud SequenceSource::scan(std::size_t index) const {
  return read_scan(scan_paths_.at(index));
}

}  // namespace lodom
