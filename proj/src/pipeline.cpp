#include "lodom/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <future>
#include <thread>

#include <json.hpp>

#include "lodom/cloud_ops.hpp"
#include "lodom/fusion.hpp"
#include "lodom/sweep.hpp"

namespace lodom {

namespace {

class P2pProvider final : public MeasurementProvider {
 public:
  P2pProvider(const IcpConfig& cfg, std::size_t max_points)
      : cfg_(cfg), max_points_(max_points) {}
  std::string name() const override { return "p2p"; }

  std::optional<Measurement> measure(const RegistrationContext& ctx) override {
    stats_.clear();
    const PointCloud src = stride_sample(ctx.source, max_points_);
    auto result = multiplex_icp(src, ctx.target, ctx.prev_estimate,
                                ctx.prediction, ctx.predicted_cov, cfg_);
    if (!result) return std::nullopt;
    stats_["rmse"] = result->winner.rmse;
    stats_["iterations"] = result->winner.iterations;
    stats_["winner_seed"] = result->winner_seed;
    stats_["seeds_run"] = result->seeds_run;
    return result->measurement;
  }

  std::map<std::string, double> last_stats() const override { return stats_; }

 private:
  IcpConfig cfg_;
  std::size_t max_points_;
  std::map<std::string, double> stats_;
};

class P2planeProvider final : public MeasurementProvider {
 public:
  P2planeProvider(const NormalIcpConfig& cfg, std::size_t max_points)
      : cfg_(cfg), max_points_(max_points) {}
  std::string name() const override { return "p2plane"; }

  std::optional<Measurement> measure(const RegistrationContext& ctx) override {
    stats_.clear();
    const PointCloud src = stride_sample(ctx.source, max_points_);
    auto result = p2plane_measure(src, ctx.target, ctx.prev_estimate,
                                  ctx.prediction, ctx.predicted_cov, cfg_);
    if (!result) return std::nullopt;
    stats_["rmse"] = result->icp.rmse;
    stats_["iterations"] = result->icp.iterations;
    stats_["filtered_points"] = static_cast<double>(result->filtered_points);
    stats_["fallback"] = result->used_fallback ? 1.0 : 0.0;
    return result->measurement;
  }

  std::map<std::string, double> last_stats() const override { return stats_; }

 private:
  NormalIcpConfig cfg_;
  std::size_t max_points_;
  std::map<std::string, double> stats_;
};

class CornerProvider final : public MeasurementProvider {
 public:
  explicit CornerProvider(const CornerConfig& cfg) : cfg_(cfg) {}
  std::string name() const override { return "svd"; }

  std::optional<Measurement> measure(const RegistrationContext& ctx) override {
    stats_.clear();
    // Corners are extracted in the vehicle frame, where the longitudinal
    // direction is azimuth zero.
    if (!has_prev_) {
      prev_corners_ = extract_corners(ctx.target, cfg_, 0.0);
      has_prev_ = true;
    }
    std::vector<CornerFeature> current = extract_corners(ctx.source, cfg_, 0.0);
    stats_["corners_prev"] = static_cast<double>(prev_corners_.size());
    stats_["corners_curr"] = static_cast<double>(current.size());

    // Map the previous corners into the predicted current frame so the
    // association gate compares motion-compensated positions.
    const RigidTransform into_pred = relative(ctx.prediction, ctx.prev_estimate);
    std::vector<CornerFeature> mapped = prev_corners_;
    for (auto& c : mapped) {
      c.m = into_pred.apply(c.m);
      c.j = into_pred.apply(c.j);
      c.n = into_pred.apply(c.n);
    }

    const auto pairs = associate(mapped, current, cfg_);
    stats_["matches"] = static_cast<double>(pairs.size());

    std::vector<Vec3> x, y;
    std::vector<double> rmses;
    double range_sum = 0.0;
    for (const auto& [i, j] : pairs) {
      // A reference-plane flip between frames swaps the N point; such a
      // pair would poison the alignment, so require N consistency too.
      if ((mapped[i].n - current[j].n).norm() >= 2.0 * cfg_.assoc_max_dist)
        continue;
      x.insert(x.end(), {mapped[i].m, mapped[i].j, mapped[i].n});
      y.insert(y.end(), {current[j].m, current[j].j, current[j].n});
      rmses.push_back(mapped[i].fit_rmse);
      rmses.push_back(current[j].fit_rmse);
      range_sum += current[j].m.norm();
    }
    prev_corners_ = std::move(current);
    if (x.size() < 3) return std::nullopt;

    const auto delta = svd_transform(x, y);
    if (!delta) return std::nullopt;
    stats_["pairs_used"] = static_cast<double>(x.size() / 3);

    const double range_scale = range_sum / static_cast<double>(x.size() / 3);
    double rmse_mean = 0.0;
    for (double r : rmses) rmse_mean += r;
    rmse_mean /= static_cast<double>(rmses.size());
    stats_["rmse"] = rmse_mean;
    return svd_measure(*delta, rmses, ctx.prediction, cfg_, range_scale);
  }

  std::map<std::string, double> last_stats() const override { return stats_; }

 private:
  CornerConfig cfg_;
  std::vector<CornerFeature> prev_corners_;
  bool has_prev_ = false;
  std::map<std::string, double> stats_;
};

}  // namespace

std::unique_ptr<MeasurementProvider> make_p2p_provider(const IcpConfig& cfg,
                                                       std::size_t max_points) {
  return std::make_unique<P2pProvider>(cfg, max_points);
}
std::unique_ptr<MeasurementProvider> make_p2plane_provider(const NormalIcpConfig& cfg,
                                                           std::size_t max_points) {
  return std::make_unique<P2planeProvider>(cfg, max_points);
}
std::unique_ptr<MeasurementProvider> make_corner_provider(const CornerConfig& cfg) {
  return std::make_unique<CornerProvider>(cfg);
}

Pipeline::Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.enable_p2p)
    providers_.push_back(make_p2p_provider(cfg_.icp, cfg_.max_registration_points));
  if (cfg_.enable_p2plane)
    providers_.push_back(
        make_p2plane_provider(cfg_.normal_icp, cfg_.max_registration_points));
  if (cfg_.enable_svd) providers_.push_back(make_corner_provider(cfg_.corner));
}

void Pipeline::set_providers(
    std::vector<std::unique_ptr<MeasurementProvider>> providers) {
  providers_ = std::move(providers);
}

RunResult Pipeline::run(const SequenceSource& source) {
  RunResult result;
  result.fail_aware = FailAware(cfg_.fail_aware);
  if (source.size() == 0) return result;

  const double dt = source.sweep_period();
  const Ukf ukf(cfg_.ukf);

  FilterState fs;
  fs.estimate = source.has_ground_truth() ? source.ground_truth().front() : Pose6{};
  fs.covariance = cfg_.initial_sigma.cwiseProduct(cfg_.initial_sigma).asDiagonal();
  fs.prediction = fs.estimate;
  fs.predicted_covariance = fs.covariance;

  std::vector<TimedPose> history{{0.0, fs.estimate}};
  result.trajectory.push_back(fs.estimate);
  result.fail_aware.update(0.0, std::sqrt(fs.covariance(5, 5)));
  result.fail_csv.push_back(FailAware::csv_header());
  result.fail_csv.push_back(result.fail_aware.csv_row());

  bool gating_active = false;
  constexpr std::size_t kMaxBootstrapFrames = 20;
  // Exponentially smoothed accelerations for the motion recovery: raw
  // second differences of centimeter-level estimates are several m/s^2 of
  // noise, which the slip solver would turn into phantom steering.
  bool motion_smoother_ready = false;
  double smooth_a_y = 0.0, smooth_a_x = 0.0, smooth_yaw_acc = 0.0;
  const double smooth_alpha = 1.0 - std::exp2(-dt / 0.3);

  PointCloud prev_cloud = source.scan(0);

  // First-pair initialization: the first sweep of a moving vehicle is
  // skewed and cannot be compensated without a motion estimate, so
  // register, re-deskew with the implied motion, and repeat; the loop
  // converges geometrically onto the true frame velocity.
  std::optional<RigidTransform> init_delta;
  if (source.size() > 1 && cfg_.sweep_correction) {
    const PointCloud raw1 = source.scan(1);
    const PointCloud src1 = stride_sample(raw1, cfg_.max_registration_points);
    RigidTransform delta;
    for (int iter = 0; iter < 5; ++iter) {
      const PointCloud corrected =
          correct_sweep(src1, fs.estimate, compose(fs.estimate, delta));
      auto reg = p2plane_measure(corrected, prev_cloud, fs.estimate,
                                 compose(fs.estimate, delta),
                                 fs.covariance, cfg_.normal_icp);
      if (!reg) break;
      const RigidTransform next = relative(fs.estimate, reg->measurement.value);
      const double step = (next.translation - delta.translation).norm();
      delta = next;
      init_delta = delta;
      if (step < 1e-3) break;
    }
  }

  std::future<PointCloud> prefetch;
  if (source.size() > 1)
    prefetch = std::async(std::launch::async, [&source] { return source.scan(1); });

  for (std::size_t k = 1; k < source.size(); ++k) {
    const double t_k = static_cast<double>(k) * dt;

    MotionPrediction model;
    if (history.size() >= 3) {
      MotionInputs inputs = recover_motion(history, dt);
      if (!motion_smoother_ready) {
        smooth_a_y = inputs.a_y;
        smooth_a_x = inputs.a_x;
        smooth_yaw_acc = inputs.yaw_acc;
        motion_smoother_ready = true;
      } else {
        smooth_a_y += smooth_alpha * (inputs.a_y - smooth_a_y);
        smooth_a_x += smooth_alpha * (inputs.a_x - smooth_a_x);
        smooth_yaw_acc += smooth_alpha * (inputs.yaw_acc - smooth_yaw_acc);
      }
      inputs.a_y = smooth_a_y;
      inputs.a_x = smooth_a_x;
      inputs.yaw_acc = smooth_yaw_acc;
      model = build_prediction(inputs, cfg_.vehicle, dt, cfg_.process_sigma,
                               history.back().pose);
    } else {
      model = predict_state(history, cfg_.vehicle, dt, cfg_.process_sigma);
    }
    if (k == 1 && init_delta) {
      // Seed the first prediction with the initialization delta instead of
      // the constant-pose guess.
      const RigidTransform delta = *init_delta;
      const Pose6 anchor = fs.estimate;
      model.transition = [anchor, delta](const Pose6& pose) {
        const RigidTransform offset = relative(anchor, pose);
        return compose(compose(anchor, delta), offset);
      };
      model.predicted = model.transition(history.back().pose);
    }
    fs = ukf.predict(fs, model.transition, model.process_noise, dt);

    PointCloud raw = prefetch.valid() ? prefetch.get() : source.scan(k);
    if (k + 1 < source.size())
      prefetch = std::async(std::launch::async,
                            [&source, k] { return source.scan(k + 1); });

    PointCloud corrected = cfg_.sweep_correction
                               ? correct_sweep(raw, fs.estimate, fs.prediction)
                               : std::move(raw);

    const RegistrationContext ctx{corrected, prev_cloud, fs.estimate,
                                  fs.prediction, fs.predicted_covariance};

    std::vector<std::optional<Measurement>> raw_measurements(providers_.size());
    const bool parallel = cfg_.parallel_measurements &&
                          std::thread::hardware_concurrency() > 1 &&
                          providers_.size() > 1;
    if (parallel) {
      std::vector<std::future<std::optional<Measurement>>> futures;
      futures.reserve(providers_.size());
      for (auto& provider : providers_)
        futures.push_back(std::async(std::launch::async,
                                     [&provider, &ctx] { return provider->measure(ctx); }));
      for (std::size_t i = 0; i < futures.size(); ++i)
        raw_measurements[i] = futures[i].get();
    } else {
      for (std::size_t i = 0; i < providers_.size(); ++i)
        raw_measurements[i] = providers_[i]->measure(ctx);
    }

    std::vector<Measurement> available;
    std::vector<std::size_t> available_idx;
    for (std::size_t i = 0; i < raw_measurements.size(); ++i) {
      if (raw_measurements[i]) {
        available.push_back(*raw_measurements[i]);
        available_idx.push_back(i);
      }
    }

    FrameDiagnostics diag;
    diag.frame = k;

    // Until the filter demonstrably tracks (the fused measurement first
    // lands inside the gating ellipse), measurements fuse ungated with
    // equal weights: the bootstrap prediction knows nothing about the
    // initial velocity, and gating against it rejects every honest
    // measurement, which would freeze the filter at rest. The switch to
    // Eq.-22 gating is one-way.
    std::optional<Measurement> fused;
    if (!available.empty() && !gating_active) {
      for (auto& m : available) m.weight = 1.0;
      Mat6 wide = fs.predicted_covariance;
      wide(0, 0) = wide(1, 1) = 1e12;
      fused = fuse(available, fs.prediction, wide);
      if (fused && (fusion_weight(*fused, fs.prediction,
                                  fs.predicted_covariance) > 0.0 ||
                    k >= kMaxBootstrapFrames))
        gating_active = true;
    } else if (!available.empty()) {
      fused = fuse(available, fs.prediction, fs.predicted_covariance);
    }
    if (fused) {
      fs = ukf.update(fs, *fused);
      diag.updated = true;
    } else {
      // No usable measurement: the prediction stands and its grown
      // covariance becomes the posterior, which the fail-aware indicator
      // then sees.
      fs.estimate = fs.prediction;
      fs.covariance = fs.predicted_covariance;
      diag.updated = false;
    }
    fs.t = t_k;

    result.trajectory.push_back(fs.estimate);
    history.push_back({t_k, fs.estimate});
    if (history.size() > 4) history.erase(history.begin());

    result.fail_aware.update(t_k, std::sqrt(std::max(fs.covariance(5, 5), 0.0)));
    result.fail_csv.push_back(result.fail_aware.csv_row());

    diag.sigma_psi = result.fail_aware.last_sigma();
    diag.eta = result.fail_aware.eta();
    const double ttf = result.fail_aware.time_to_failure();
    diag.time_to_failure = std::isinf(ttf) ? -1.0 : ttf;
    diag.status = result.fail_aware.status();
    for (std::size_t i = 0; i < providers_.size(); ++i) {
      FrameDiagnostics::PerMeasurement pm;
      pm.name = providers_[i]->name();
      pm.available = raw_measurements[i].has_value();
      pm.stats = providers_[i]->last_stats();
      diag.measurements.push_back(std::move(pm));
    }
    for (std::size_t i = 0; i < available.size(); ++i)
      diag.measurements[available_idx[i]].weight = available[i].weight;
    result.diagnostics.push_back(std::move(diag));

    prev_cloud = std::move(corrected);
  }
  return result;
}

void write_run_result(const RunResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_trajectory(result.trajectory, out_dir / "trajectory.txt");

  std::ofstream csv(out_dir / "fail_aware.csv");
  for (const auto& row : result.fail_csv) csv << row << "\n";

  nlohmann::json frames = nlohmann::json::array();
  for (const auto& diag : result.diagnostics) {
    nlohmann::json j;
    j["frame"] = diag.frame;
    j["updated"] = diag.updated;
    j["sigma_psi"] = diag.sigma_psi;
    j["eta"] = diag.eta;
    j["time_to_failure"] = diag.time_to_failure;
    j["status"] = to_string(diag.status);
    for (const auto& pm : diag.measurements) {
      nlohmann::json m;
      m["available"] = pm.available;
      m["weight"] = pm.weight;
      for (const auto& [key, value] : pm.stats) m[key] = value;
      j["measurements"][pm.name] = std::move(m);
    }
    frames.push_back(std::move(j));
  }
  std::ofstream diag_out(out_dir / "diagnostics.json");
  diag_out << frames.dump(1) << "\n";
}

namespace {

void load_icp(const nlohmann::json& j, IcpConfig& cfg) {
  cfg.max_iter = j.value("max_iter", cfg.max_iter);
  cfg.tol = j.value("tol", cfg.tol);
  cfg.max_corr_dist = j.value("max_corr_dist", cfg.max_corr_dist);
  cfg.voxel = j.value("voxel", cfg.voxel);
  cfg.min_points = j.value("min_points", cfg.min_points);
  cfg.k_trans = j.value("k_trans", cfg.k_trans);
  cfg.k_rot = j.value("k_rot", cfg.k_rot);
  cfg.seed_scale = j.value("seed_scale", cfg.seed_scale);
  cfg.parallel_seeds = j.value("parallel_seeds", cfg.parallel_seeds);
}

}  // namespace

PipelineConfig PipelineConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  nlohmann::json j;
  in >> j;

  PipelineConfig cfg;
  if (j.contains("vehicle")) {
    const auto& v = j["vehicle"];
    auto& p = cfg.vehicle;
    p.mass = v.value("mass", p.mass);
    p.spring_front = v.value("spring_front", p.spring_front);
    p.spring_rear = v.value("spring_rear", p.spring_rear);
    p.shock_front = v.value("shock_front", p.shock_front);
    p.shock_rear = v.value("shock_rear", p.shock_rear);
    p.d_roll = v.value("d_roll", p.d_roll);
    p.d_pitch = v.value("d_pitch", p.d_pitch);
    p.inertia_x = v.value("inertia_x", p.inertia_x);
    p.inertia_y = v.value("inertia_y", p.inertia_y);
    p.inertia_z = v.value("inertia_z", p.inertia_z);
    p.cog_height = v.value("cog_height", p.cog_height);
    p.dist_front = v.value("dist_front", p.dist_front);
    p.dist_rear = v.value("dist_rear", p.dist_rear);
    p.track_front = v.value("track_front", p.track_front);
    p.track_rear = v.value("track_rear", p.track_rear);
    p.cornering_front = v.value("cornering_front", p.cornering_front);
    p.cornering_rear = v.value("cornering_rear", p.cornering_rear);
    p.v_min = v.value("v_min", p.v_min);
    p.validate();
  }
  if (j.contains("ukf")) {
    cfg.ukf.alpha = j["ukf"].value("alpha", cfg.ukf.alpha);
    cfg.ukf.beta = j["ukf"].value("beta", cfg.ukf.beta);
    cfg.ukf.kappa = j["ukf"].value("kappa", cfg.ukf.kappa);
  }
  if (j.contains("icp")) load_icp(j["icp"], cfg.icp);
  if (j.contains("normal_icp")) {
    const auto& n = j["normal_icp"];
    auto& c = cfg.normal_icp;
    c.k_neighbors = n.value("k_neighbors", c.k_neighbors);
    c.sigma_floor = n.value("sigma_floor", c.sigma_floor);
    c.include_transverse = n.value("include_transverse", c.include_transverse);
    c.max_iter = n.value("max_iter", c.max_iter);
    c.tol = n.value("tol", c.tol);
    c.max_corr_dist = n.value("max_corr_dist", c.max_corr_dist);
    c.voxel = n.value("voxel", c.voxel);
    c.min_points = n.value("min_points", c.min_points);
    c.k_trans = n.value("k_trans", c.k_trans);
    c.k_rot = n.value("k_rot", c.k_rot);
  }
  if (j.contains("corner")) {
    const auto& n = j["corner"];
    auto& c = cfg.corner;
    c.cell_size = n.value("cell_size", c.cell_size);
    c.count_threshold = n.value("count_threshold", c.count_threshold);
    c.min_vertical_extent = n.value("min_vertical_extent", c.min_vertical_extent);
    c.cluster_eps = n.value("cluster_eps", c.cluster_eps);
    c.cluster_min_samples = n.value("cluster_min_samples", c.cluster_min_samples);
    c.min_cluster_size = n.value("min_cluster_size", c.min_cluster_size);
    c.ransac_iterations = n.value("ransac_iterations", c.ransac_iterations);
    c.ransac_inlier_dist = n.value("ransac_inlier_dist", c.ransac_inlier_dist);
    c.angle_min_deg = n.value("angle_min_deg", c.angle_min_deg);
    c.angle_max_deg = n.value("angle_max_deg", c.angle_max_deg);
    c.max_normal_z = n.value("max_normal_z", c.max_normal_z);
    c.assoc_max_dist = n.value("assoc_max_dist", c.assoc_max_dist);
    c.max_range = n.value("max_range", c.max_range);
    c.seed = n.value("seed", c.seed);
  }
  if (j.contains("fail_aware")) {
    const auto& n = j["fail_aware"];
    cfg.fail_aware.threshold = n.value("threshold", cfg.fail_aware.threshold);
    cfg.fail_aware.warn_horizon = n.value("warn_horizon", cfg.fail_aware.warn_horizon);
    cfg.fail_aware.rate_half_life =
        n.value("rate_half_life", cfg.fail_aware.rate_half_life);
    cfg.fail_aware.smooth_five_point =
        n.value("smooth_five_point", cfg.fail_aware.smooth_five_point);
  }
  if (j.contains("process_sigma")) {
    const auto v = j["process_sigma"].get<std::vector<double>>();
    if (v.size() != 6)
      throw std::runtime_error("process_sigma must have 6 entries");
    for (int i = 0; i < 6; ++i) cfg.process_sigma[i] = v[i];
  }
  cfg.sweep_correction = j.value("sweep_correction", cfg.sweep_correction);
  cfg.max_registration_points =
      j.value("max_registration_points", cfg.max_registration_points);
  cfg.parallel_measurements =
      j.value("parallel_measurements", cfg.parallel_measurements);
  if (j.contains("measurements")) {
    cfg.enable_p2p = cfg.enable_p2plane = cfg.enable_svd = false;
    for (const auto& name : j["measurements"].get<std::vector<std::string>>()) {
      if (name == "p2p") cfg.enable_p2p = true;
      else if (name == "p2plane") cfg.enable_p2plane = true;
      else if (name == "svd") cfg.enable_svd = true;
      else throw std::runtime_error("unknown measurement: " + name);
    }
  }
  return cfg;
}

}  // namespace lodom
