#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "selftest.hpp"
#include "stvo/config.hpp"
#include "stvo/dataset.hpp"
#include "stvo/error.hpp"
#include "stvo/eval.hpp"
#include "stvo/network.hpp"
#include "stvo/pipeline.hpp"
#include "stvo/synth.hpp"

namespace fs = std::filesystem;

namespace {

struct RunOptions {
  std::string sequence;
  std::string out = "stvo_out";
  std::string config;
  std::optional<std::string> flow, depth, format, weights;
  std::optional<int> iterations, stride, window, neighbors;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau_kf;
  std::string dump_weights;
  bool cache_sam = false;
};

struct EvalOptions {
  std::string gt, est;
  double max_dt = 0.02;
};

struct SynthOptions {
  int frames = 20;
  std::uint64_t seed = 0;
  std::string out;
  std::string kind = "orbit";
  int width = 512, height = 384;
};

int cmd_run(const RunOptions& o) {
  stvo::Config cfg = o.config.empty() ? stvo::Config{} : stvo::load_config(o.config);
  cfg = stvo::apply_env_overrides(cfg, [](const char* k) { return std::getenv(k); });
  if (o.flow) cfg.flow_source = stvo::parse_flow_source(*o.flow);
  if (o.depth) cfg.depth_source = stvo::parse_depth_source(*o.depth);
  if (o.format) cfg.format = *o.format;
  if (o.weights) cfg.weights = *o.weights;
  if (o.iterations) cfg.iterations = *o.iterations;
  if (o.stride) cfg.stride = *o.stride;
  if (o.window) cfg.window = *o.window;
  if (o.neighbors) cfg.neighbors = *o.neighbors;
  if (o.seed) cfg.seed = *o.seed;
  if (o.tau_kf) cfg.tau_kf = *o.tau_kf;
  if (o.cache_sam) cfg.cache_sam = true;
  cfg.validate();

  const stvo::Sequence seq = stvo::load_sequence(o.sequence, cfg.format, cfg.max_dt);
  spdlog::info("{} frames from {}", seq.frames.size(), o.sequence);

  std::optional<stvo::WeightStore> weights;
  if (cfg.flow_source == stvo::FlowSource::kNetwork) {
    weights = cfg.weights.empty() ? stvo::init_network_weights(cfg.network, cfg.seed)
                                  : stvo::WeightStore::load(cfg.weights);
    if (!o.dump_weights.empty()) weights->save(o.dump_weights);
  }

  const auto progress = [](const stvo::FrameRecord& r) {
    if (!r.keyframe) {
      spdlog::debug("frame {} skipped (probe {:.3f})", r.frame, r.motion_probe);
      return;
    }
    const double cost = r.ba.empty() ? 0.0 : r.ba.back().final_cost;
    spdlog::info("frame {} -> keyframe {} (probe {:.3f}, {} BA calls, cost {:.6g})", r.frame,
                 *r.keyframe, r.motion_probe, r.ba.size(), cost);
  };
  const stvo::RunArtifacts run =
      stvo::run_vo(cfg, seq, weights ? &*weights : nullptr, progress);
  stvo::write_artifacts(o.out, run);
  if (run.metrics.contains("ate")) {
    std::printf("rmse %.6f\n", run.metrics["ate"]["rmse"].get<double>());
  }
  spdlog::info("wrote {}", (fs::path(o.out) / "trajectory.txt").string());
  return 0;
}

int cmd_eval(const EvalOptions& o) {
  const stvo::AteResult r = stvo::ate(stvo::read_tum_trajectory(o.est),
                                      stvo::read_tum_trajectory(o.gt), o.max_dt);
  std::printf("rmse %.6f\nmean %.6f\nmedian %.6f\nmax %.6f\nscale %.6f\npairs %zu\n", r.rmse,
              r.mean, r.median, r.max, r.alignment.scale, r.pairs);
  return 0;
}

int cmd_synth(const SynthOptions& o) {
  const auto kind = stvo::parse_trajectory_kind(o.kind);
  stvo::SceneParams params;
  params.width = o.width;
  params.height = o.height;
  params.focal *= static_cast<double>(o.width) / 512.0;  // keep the field of view
  const stvo::Scene scene =
      stvo::make_scene(o.seed, stvo::generate_trajectory(kind, o.frames, o.seed), params);
  stvo::export_sequence(scene, o.out);
  spdlog::info("{} {} frames written to {}", o.frames, o.kind, o.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal visual odometry"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  RunOptions ro;
  auto* run = app.add_subcommand("run", "Run visual odometry on a sequence");
  run->add_option("sequence", ro.sequence, "Sequence directory")->required()->check(CLI::ExistingDirectory);
  run->add_option("-o,--out", ro.out, "Output directory");
  run->add_option("-c,--config", ro.config, "JSON config")->check(CLI::ExistingFile);
  run->add_option("--flow", ro.flow, "network | oracle");
  run->add_option("--depth", ro.depth, "Depth source for attention: ba | external");
  run->add_option("--format", ro.format, "auto | tum-rgbd | image-dir");
  run->add_option("--weights", ro.weights, "STVW weight file");
  run->add_option("--dump-weights", ro.dump_weights, "Save the weights used to this file");
  run->add_option("--iters", ro.iterations, "Update iterations per keyframe");
  run->add_option("--stride", ro.stride, "Use every k-th frame");
  run->add_option("--window", ro.window, "Live keyframes");
  run->add_option("--neighbors", ro.neighbors, "Reference keyframes per edge fan-out");
  run->add_option("--seed", ro.seed, "Seed for weights and motion states");
  run->add_option("--tau-kf", ro.tau_kf, "Keyframe admission threshold (px at 1/8 res)");
  run->add_flag("--cache-sam", ro.cache_sam, "Build attention once per keyframe");

  EvalOptions eo;
  auto* eval = app.add_subcommand("eval", "ATE between two TUM trajectories");
  eval->add_option("--gt", eo.gt, "Ground truth")->required()->check(CLI::ExistingFile);
  eval->add_option("--est", eo.est, "Estimate")->required()->check(CLI::ExistingFile);
  eval->add_option("--max-dt", eo.max_dt, "Association tolerance in seconds");

  SynthOptions so;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic sequence");
  synth->add_option("--frames", so.frames, "Frame count")->check(CLI::PositiveNumber);
  synth->add_option("--seed", so.seed, "Scene and trajectory seed");
  synth->add_option("--out", so.out, "Output directory")->required();
  synth->add_option("--kind", so.kind, "orbit | forward | zigzag");
  synth->add_option("--width", so.width, "Image width (multiple of 8)")->check(CLI::PositiveNumber);
  synth->add_option("--height", so.height, "Image height (multiple of 8)")->check(CLI::PositiveNumber);

  auto* selftest = app.add_subcommand("selftest", "Quick invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  spdlog::set_default_logger(spdlog::stderr_logger_mt("stvo"));
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*run) return cmd_run(ro);
    if (*eval) return cmd_eval(eo);
    if (*synth) return cmd_synth(so);
    if (*selftest) return stvo_tools::run_selftest(std::cout) ? 0 : 1;
  } catch (const stvo::Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 2;
}
