#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "lodom/evaluation.hpp"
#include "lodom/pipeline.hpp"
#include "lodom/synth_world.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Fail-aware LiDAR odometry"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Process a sequence directory");
  std::string sequence_dir, config_path, out_dir = "out", measurements;
  bool no_svd = false, strict = false, no_sweep = false;
  double dt = 0.1;
  run->add_option("--sequence", sequence_dir, "KITTI-layout sequence directory")
      ->required();
  run->add_option("--config", config_path, "pipeline config JSON");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--measurements", measurements,
                  "comma-separated subset of p2p,p2plane,svd");
  run->add_option("--dt", dt, "sweep period in seconds");
  run->add_flag("--no-svd", no_svd, "disable the corner/SVD measurement");
  run->add_flag("--no-sweep-correction", no_sweep, "skip motion compensation");
  run->add_flag("--strict", strict,
                "exit nonzero when the fail-aware status reaches FAILED");

  // eval
  auto* eval = app.add_subcommand("eval", "KITTI relative errors of a trajectory");
  std::string est_path, gt_path;
  bool eval_json = false;
  eval->add_option("--est", est_path, "estimated trajectory file")->required();
  eval->add_option("--gt", gt_path, "ground-truth trajectory file")->required();
  eval->add_flag("--json", eval_json, "print machine-readable JSON");

  // synth
  auto* synth = app.add_subcommand("synth", "Render a synthetic sequence");
  std::string scenario_path, synth_out;
  synth->add_option("--scenario", scenario_path, "scenario JSON")->required();
  synth->add_option("--out", synth_out, "output sequence directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      lodom::PipelineConfig cfg = config_path.empty()
                                      ? lodom::PipelineConfig{}
                                      : lodom::PipelineConfig::from_json_file(config_path);
      if (!measurements.empty()) {
        cfg.enable_p2p = measurements.find("p2p") != std::string::npos;
        cfg.enable_p2plane = measurements.find("p2plane") != std::string::npos;
        cfg.enable_svd = measurements.find("svd") != std::string::npos;
      }
      if (no_svd) cfg.enable_svd = false;
      if (no_sweep) cfg.sweep_correction = false;

      const auto source = lodom::SequenceSource::open(sequence_dir, dt);
      lodom::Pipeline pipeline(cfg);
      const auto result = pipeline.run(source);
      lodom::write_run_result(result, out_dir);

      std::printf("frames: %zu\n", result.trajectory.size());
      std::printf("fail-aware: eta=%.6g status=%s\n", result.fail_aware.eta(),
                  lodom::to_string(result.fail_aware.status()).c_str());
      if (source.has_ground_truth()) {
        const auto errors = lodom::kitti_relative_errors(result.trajectory,
                                                         source.ground_truth());
        if (errors)
          std::printf("kitti errors: %.3f %% translation, %.5f deg/m rotation "
                      "(%zu spans)\n",
                      errors->translation_pct, errors->rotation_deg_per_m,
                      errors->span_count);
      }
      if (strict && result.fail_aware.status() == lodom::FailStatus::Failed)
        return 2;
    } else if (*eval) {
      const auto est = lodom::read_poses(est_path);
      const auto gt = lodom::read_poses(gt_path);
      const auto errors = lodom::kitti_relative_errors(est, gt);
      if (!errors) {
        std::fprintf(stderr, "insufficient length: no 100 m span\n");
        return 1;
      }
      if (eval_json) {
        std::printf("{\"translation_pct\": %.9g, \"rotation_deg_per_m\": %.9g, "
                    "\"spans\": %zu}\n",
                    errors->translation_pct, errors->rotation_deg_per_m,
                    errors->span_count);
      } else {
        std::printf("translation: %.3f %%\nrotation: %.5f deg/m\nspans: %zu\n",
                    errors->translation_pct, errors->rotation_deg_per_m,
                    errors->span_count);
      }
    } else if (*synth) {
      const auto scenario = lodom::SynthScenario::from_json_file(scenario_path);
      lodom::write_sequence(scenario, synth_out);
      std::printf("wrote %zu frames to %s\n", scenario.n_frames, synth_out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
