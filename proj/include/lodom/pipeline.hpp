#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lodom/corner_svd.hpp"
#include "lodom/fail_aware.hpp"
#include "lodom/icp_normal.hpp"
#include "lodom/icp_point.hpp"
#include "lodom/kitti_io.hpp"
#include "lodom/ukf.hpp"
#include "lodom/vehicle_model.hpp"

namespace lodom {

struct PipelineConfig {
  VehicleParams vehicle;
  UkfParams ukf;
  IcpConfig icp;
  NormalIcpConfig normal_icp;
  CornerConfig corner;
  FailAwareConfig fail_aware;
  Vec6 process_sigma = default_process_sigma();
  // Planar components wide enough that the gating ellipse admits honest
  // measurements while the motion model bootstraps; the yaw component
  // starts at its steady-state level so the fail-aware accumulator is not
  // flooded by a settling transient (the run's start frame defines the
  // heading datum anyway).
  Vec6 initial_sigma = (Vec6() << 0.5, 0.5, 0.3, 0.02, 0.02, 5e-4).finished();
  bool sweep_correction = true;
  bool enable_p2p = true;
  bool enable_p2plane = true;
  bool enable_svd = true;
  bool parallel_measurements = true;
  // Cap on source-cloud points handed to the ICP providers (uniform
  // stride); the target stays dense for nearest-neighbor fidelity.
  std::size_t max_registration_points = 20000;

  PipelineConfig() {
    // Running profile: admit the transverse bands, widen the band floor
    // (scenes are not perfectly Manhattan), and keep the plane
    // correspondences tight since the seed is the filter prediction.
    normal_icp.include_transverse = true;
    normal_icp.sigma_floor = 0.2;
    normal_icp.max_corr_dist = 0.6;
    normal_icp.voxel = 0.25;
    normal_icp.tol = 1e-4;
    // Frame-rate profile for the multiplexed seeds.
    icp.voxel = 0.3;
    icp.tol = 1e-4;
    icp.max_iter = 30;
  }

  static PipelineConfig from_json_file(const std::filesystem::path& path);
};

/// Context handed to each measurement provider every frame: the corrected
/// current sweep, the previous corrected sweep, and the filter's prediction.
struct RegistrationContext {
  const PointCloud& source;
  const PointCloud& target;
  Pose6 prev_estimate;
  Pose6 prediction;
  Mat6 predicted_cov;
};

/// Anything that can turn a registration context into a 6-DoF measurement
/// plugs into the fusion stage through this interface.
class MeasurementProvider {
 public:
  virtual ~MeasurementProvider() = default;
  virtual std::string name() const = 0;
  virtual std::optional<Measurement> measure(const RegistrationContext& ctx) = 0;
  /// Scalar diagnostics of the last measure() call (RMSE, counts, ...).
  virtual std::map<std::string, double> last_stats() const { return {}; }
};

std::unique_ptr<MeasurementProvider> make_p2p_provider(
    const IcpConfig& cfg, std::size_t max_source_points = 0);
std::unique_ptr<MeasurementProvider> make_p2plane_provider(
    const NormalIcpConfig& cfg, std::size_t max_source_points = 0);
std::unique_ptr<MeasurementProvider> make_corner_provider(const CornerConfig& cfg);

struct FrameDiagnostics {
  std::size_t frame = 0;
  bool updated = false;
  double sigma_psi = 0.0;
  double eta = 0.0;
  double time_to_failure = -1.0;  // -1 encodes unbounded
  FailStatus status = FailStatus::Ok;
  struct PerMeasurement {
    std::string name;
    bool available = false;
    double weight = 0.0;
    std::map<std::string, double> stats;
  };
  std::vector<PerMeasurement> measurements;
};

struct RunResult {
  std::vector<Pose6> trajectory;       // one pose per input scan
  std::vector<std::string> fail_csv;   // header + one row per frame
  std::vector<FrameDiagnostics> diagnostics;
  FailAware fail_aware{FailAwareConfig{}};
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg);

  /// Replace the default provider set (for custom measurement stacks).
  void set_providers(std::vector<std::unique_ptr<MeasurementProvider>> providers);

  /// Run the full loop over the sequence:
  /// predict -> sweep-correct -> measure -> fuse -> update -> fail-aware.
  RunResult run(const SequenceSource& source);

 private:
  PipelineConfig cfg_;
  std::vector<std::unique_ptr<MeasurementProvider>> providers_;
};

/// Write result artifacts: trajectory.txt (KITTI pose format),
/// fail_aware.csv, diagnostics.json.
void write_run_result(const RunResult& result, const std::filesystem::path& out_dir);

}  // namespace lodom
