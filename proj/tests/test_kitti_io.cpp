#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "lodom/kitti_io.hpp"

using namespace lodom;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("lodom_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

void write_bytes(const fs::path& p, const void* data, std::size_t n) {
  std::ofstream out(p, std::ios::binary);
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

}  // namespace

TEST_CASE("read_scan parses two known quadruples exactly") {
  TempDir dir;
  const float data[8] = {1.0f, 2.0f, 3.0f, 0.5f, -4.0f, 5.0f, -6.0f, 0.1f};
  write_bytes(dir.path / "scan.bin", data, sizeof(data));

  const PointCloud cloud = read_scan(dir.path / "scan.bin");
  REQUIRE(cloud.size() == 2);
  CHECK(cloud.points[0] == Vec3(1.0, 2.0, 3.0));
  CHECK(cloud.points[1] == Vec3(-4.0, 5.0, -6.0));
  CHECK(cloud.phase.size() == 2);
  for (double s : cloud.phase) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("read_scan of an empty file gives an empty cloud") {
  TempDir dir;
  write_bytes(dir.path / "empty.bin", "", 0);
  const PointCloud cloud = read_scan(dir.path / "empty.bin");
  CHECK(cloud.empty());
}

TEST_CASE("read_scan rejects a truncated record") {
  TempDir dir;
  const char junk[17] = {};
  write_bytes(dir.path / "bad.bin", junk, 17);
  CHECK_THROWS_AS(read_scan(dir.path / "bad.bin"), FormatError);
}

TEST_CASE("read_poses parses identity and translation lines") {
  TempDir dir;
  {
    std::ofstream out(dir.path / "poses.txt");
    out << "1 0 0 0 0 1 0 0 0 0 1 0\n";
    out << "1 0 0 5 0 1 0 0 0 0 1 2\n";
  }
  const auto poses = read_poses(dir.path / "poses.txt");
  REQUIRE(poses.size() == 2);
  CHECK(poses[0].x == doctest::Approx(0.0));
  CHECK(poses[0].yaw == doctest::Approx(0.0));
  CHECK(poses[1].x == doctest::Approx(5.0));
  CHECK(poses[1].y == doctest::Approx(0.0));
  CHECK(poses[1].z == doctest::Approx(2.0));
}

TEST_CASE("read_poses reports the offending line") {
  TempDir dir;
  {
    std::ofstream out(dir.path / "poses.txt");
    out << "1 0 0 0 0 1 0 0 0 0 1 0\n";
    out << "1 0 0 0 0 bad 0 0 0 0 1 0\n";
  }
  try {
    read_poses(dir.path / "poses.txt");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("trajectory write/read round trip is lossless to 1e-9") {
  TempDir dir;
  std::vector<Pose6> poses = {
      Pose6(),
      Pose6(5, 0, 2, 0, 0, 0),
      Pose6(1.25, -3.5, 0.75, 0.0, 0.0, 0.3),
      Pose6(100.5, 42.0, -1.0, 0.2, -0.4, 2.9),
  };
  write_trajectory(poses, dir.path / "traj.txt");
  const auto back = read_poses(dir.path / "traj.txt");
  REQUIRE(back.size() == poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    CHECK(std::abs(back[i].x - poses[i].x) < 1e-9);
    CHECK(std::abs(back[i].y - poses[i].y) < 1e-9);
    CHECK(std::abs(back[i].z - poses[i].z) < 1e-9);
    CHECK(std::abs(angle_diff(back[i].roll, poses[i].roll)) < 1e-9);
    CHECK(std::abs(angle_diff(back[i].pitch, poses[i].pitch)) < 1e-9);
    CHECK(std::abs(angle_diff(back[i].yaw, poses[i].yaw)) < 1e-9);
  }

  // write -> read -> write produces identical bytes
  write_trajectory(back, dir.path / "traj2.txt");
  std::ifstream a(dir.path / "traj.txt"), b(dir.path / "traj2.txt");
  const std::string sa((std::istreambuf_iterator<char>(a)), {});
  const std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
}

TEST_CASE("SequenceSource validates layout and pose count") {
  TempDir dir;
  fs::create_directories(dir.path / "velodyne");
  const float pt[4] = {1.0f, 0.0f, 0.0f, 0.0f};
  write_bytes(dir.path / "velodyne" / "000000.bin", pt, sizeof(pt));
  write_bytes(dir.path / "velodyne" / "000001.bin", pt, sizeof(pt));

  auto src = SequenceSource::open(dir.path);
  CHECK(src.size() == 2);
  CHECK_FALSE(src.has_ground_truth());
  CHECK(src.scan(0).size() == 1);

  // non-contiguous index
  write_bytes(dir.path / "velodyne" / "000003.bin", pt, sizeof(pt));
  CHECK_THROWS_AS(SequenceSource::open(dir.path), FormatError);
  fs::remove(dir.path / "velodyne" / "000003.bin");

  // pose count mismatch
  {
    std::ofstream out(dir.path / "poses.txt");
    out << "1 0 0 0 0 1 0 0 0 0 1 0\n";
  }
  CHECK_THROWS_AS(SequenceSource::open(dir.path), FormatError);
}

TEST_CASE("calibration conjugates ground truth into the sensor frame") {
  TempDir dir;
  fs::create_directories(dir.path / "velodyne");
  const float pt[4] = {1.0f, 0.0f, 0.0f, 0.0f};
  write_bytes(dir.path / "velodyne" / "000000.bin", pt, sizeof(pt));
  write_bytes(dir.path / "velodyne" / "000001.bin", pt, sizeof(pt));
  {
    // camera frame: x right, y down, z forward (KITTI); motion 1 m forward
    std::ofstream out(dir.path / "poses.txt");
    out << "1 0 0 0 0 1 0 0 0 0 1 0\n";
    out << "1 0 0 0 0 1 0 0 0 0 1 1\n";
  }
  {
    // velo->cam: x_cam = R * x_velo with R = [0 -1 0; 0 0 -1; 1 0 0]
    std::ofstream out(dir.path / "calib.txt");
    out << "Tr: 0 -1 0 0 0 0 -1 0 1 0 0 0\n";
  }
  const auto src = SequenceSource::open(dir.path);
  REQUIRE(src.has_ground_truth());
  // forward in cam z = forward in velo x
  CHECK(src.ground_truth()[1].x == doctest::Approx(1.0));
  CHECK(src.ground_truth()[1].y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(src.ground_truth()[1].z == doctest::Approx(0.0).epsilon(1e-12));
}
