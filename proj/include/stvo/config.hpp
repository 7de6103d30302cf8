#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "json.hpp"
#include "stvo/network.hpp"
#include "stvo/spatial.hpp"

namespace stvo {

enum class FlowSource { kNetwork, kOracle };

struct Intrinsics {
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;  // full resolution; fx = 0 means unset
  bool set() const { return fx > 0.0; }
};

struct Config {
  Intrinsics intrinsics;
  int neighbors = 3;          // r
  int window = 10;            // live keyframes
  double tau_kf = 2.4;        // px at 1/8 resolution
  int iterations = 15;        // update iterations after each admission
  int inner_iters = 2;        // damped GN steps per iteration
  double pose_damping = 1e-4;
  double depth_damping = 1e-2;
  NetworkDims network;
  std::uint64_t seed = 0;
  double motion_stddev = 0.1;
  DepthSource depth_source = DepthSource::kBa;
  FlowSource flow_source = FlowSource::kNetwork;
  DepthNormalization sam_normalization = DepthNormalization::kStandardized;
  bool cache_sam = false;     // build the attention matrix once per keyframe
  std::size_t memory_budget = kDefaultSamBudgetBytes;
  int stride = 1;
  std::string format = "auto";  // auto | tum-rgbd | image-dir
  std::string weights;          // STVW file; empty = seeded initialization
  double max_dt = 0.02;

  // Throws InvalidArgument on out-of-range values.
  void validate() const;
};

nlohmann::json to_json(const Config& c);
Config config_from_json(const nlohmann::json& j);
Config load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const Config& c);

// Every leaf key has an environment override: "/network/hidden_dim" is read
// from STVO_NETWORK_HIDDEN_DIM. Values are parsed as JSON, falling back to a
// plain string. `getenv` is injectable for tests.
Config apply_env_overrides(const Config& c,
                           const std::function<const char*(const char*)>& getenv);

std::string to_string(FlowSource s);
std::string to_string(DepthSource s);
std::string to_string(DepthNormalization n);
FlowSource parse_flow_source(const std::string& s);
DepthSource parse_depth_source(const std::string& s);
DepthNormalization parse_depth_normalization(const std::string& s);

}  // namespace stvo
