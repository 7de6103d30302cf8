#include "stvo/config.hpp"

#include <cctype>
#include <fstream>

#include "stvo/error.hpp"

namespace stvo {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, "config: " + what);
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string to_string(FlowSource s) { return s == FlowSource::kOracle ? "oracle" : "network"; }
std::string to_string(DepthSource s) { return s == DepthSource::kExternal ? "external" : "ba"; }
std::string to_string(DepthNormalization n) {
  return n == DepthNormalization::kRaw ? "raw" : "standardized";
}

FlowSource parse_flow_source(const std::string& s) {
  if (s == "network") return FlowSource::kNetwork;
  if (s == "oracle") return FlowSource::kOracle;
  throw Error(ErrorCode::kInvalidArgument, "flow source must be network|oracle, got '" + s + "'");
}

DepthSource parse_depth_source(const std::string& s) {
  if (s == "ba") return DepthSource::kBa;
  if (s == "external") return DepthSource::kExternal;
  throw Error(ErrorCode::kInvalidArgument, "depth source must be ba|external, got '" + s + "'");
}

DepthNormalization parse_depth_normalization(const std::string& s) {
  if (s == "raw") return DepthNormalization::kRaw;
  if (s == "standardized") return DepthNormalization::kStandardized;
  throw Error(ErrorCode::kInvalidArgument,
              "sam normalization must be raw|standardized, got '" + s + "'");
}

void Config::validate() const {
  require(neighbors >= 1, "neighbors must be >= 1");
  require(window >= 2, "window must be >= 2");
  require(tau_kf >= 0.0, "tau_kf must be >= 0");
  require(iterations >= 1, "iterations must be >= 1");
  require(inner_iters >= 1, "inner_iters must be >= 1");
  require(pose_damping >= 0.0 && depth_damping >= 0.0, "damping must be >= 0");
  require(stride >= 1, "stride must be >= 1");
  require(motion_stddev >= 0.0, "motion_stddev must be >= 0");
  require(max_dt > 0.0, "max_dt must be > 0");
  require(format == "auto" || format == "tum-rgbd" || format == "image-dir",
          "format must be auto|tum-rgbd|image-dir");
  const NetworkDims& n = network;
  require(n.feature_dim > 0 && n.context_dim > 0 && n.motion_dim > 0 &&
              n.motion_feature_dim > 0 && n.attention_dim > 0 && n.hidden_dim > 0 &&
              n.encoder_width > 0,
          "network widths must be positive");
  require(n.corr_levels >= 1 && n.corr_radius >= 0, "correlation levels/radius");
  if (intrinsics.set()) require(intrinsics.fy > 0.0, "fy must be > 0");
}

json to_json(const Config& c) {
  const NetworkDims& n = c.network;
  return json{
      {"intrinsics", {{"fx", c.intrinsics.fx}, {"fy", c.intrinsics.fy},
                      {"cx", c.intrinsics.cx}, {"cy", c.intrinsics.cy}}},
      {"neighbors", c.neighbors},
      {"window", c.window},
      {"tau_kf", c.tau_kf},
      {"iterations", c.iterations},
      {"inner_iters", c.inner_iters},
      {"pose_damping", c.pose_damping},
      {"depth_damping", c.depth_damping},
      {"network",
       {{"feature_dim", n.feature_dim},
        {"context_dim", n.context_dim},
        {"motion_dim", n.motion_dim},
        {"motion_feature_dim", n.motion_feature_dim},
        {"attention_dim", n.attention_dim},
        {"hidden_dim", n.hidden_dim},
        {"corr_levels", n.corr_levels},
        {"corr_radius", n.corr_radius},
        {"encoder_width", n.encoder_width}}},
      {"seed", c.seed},
      {"motion_stddev", c.motion_stddev},
      {"depth_source", to_string(c.depth_source)},
      {"flow_source", to_string(c.flow_source)},
      {"sam_normalization", to_string(c.sam_normalization)},
      {"cache_sam", c.cache_sam},
      {"memory_budget", c.memory_budget},
      {"stride", c.stride},
      {"format", c.format},
      {"weights", c.weights},
      {"max_dt", c.max_dt},
  };
}

Config config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config must be a JSON object");
  Config c;
  if (j.contains("intrinsics")) {
    const json& k = j.at("intrinsics");
    read_field(k, "fx", c.intrinsics.fx);
    read_field(k, "fy", c.intrinsics.fy);
    read_field(k, "cx", c.intrinsics.cx);
    read_field(k, "cy", c.intrinsics.cy);
  }
  read_field(j, "neighbors", c.neighbors);
  read_field(j, "window", c.window);
  read_field(j, "tau_kf", c.tau_kf);
  read_field(j, "iterations", c.iterations);
  read_field(j, "inner_iters", c.inner_iters);
  read_field(j, "pose_damping", c.pose_damping);
  read_field(j, "depth_damping", c.depth_damping);
  if (j.contains("network")) {
    const json& n = j.at("network");
    read_field(n, "feature_dim", c.network.feature_dim);
    read_field(n, "context_dim", c.network.context_dim);
    read_field(n, "motion_dim", c.network.motion_dim);
    read_field(n, "motion_feature_dim", c.network.motion_feature_dim);
    read_field(n, "attention_dim", c.network.attention_dim);
    read_field(n, "hidden_dim", c.network.hidden_dim);
    read_field(n, "corr_levels", c.network.corr_levels);
    read_field(n, "corr_radius", c.network.corr_radius);
    read_field(n, "encoder_width", c.network.encoder_width);
  }
  read_field(j, "seed", c.seed);
  read_field(j, "motion_stddev", c.motion_stddev);
  std::string s;
  if (j.contains("depth_source")) {
    read_field(j, "depth_source", s);
    c.depth_source = parse_depth_source(s);
  }
  if (j.contains("flow_source")) {
    read_field(j, "flow_source", s);
    c.flow_source = parse_flow_source(s);
  }
  if (j.contains("sam_normalization")) {
    read_field(j, "sam_normalization", s);
    c.sam_normalization = parse_depth_normalization(s);
  }
  read_field(j, "cache_sam", c.cache_sam);
  read_field(j, "memory_budget", c.memory_budget);
  read_field(j, "stride", c.stride);
  read_field(j, "format", c.format);
  read_field(j, "weights", c.weights);
  read_field(j, "max_dt", c.max_dt);
  c.validate();
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kInvalidArgument, "cannot read config " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, "config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const Config& c) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kMalformedFile, "cannot write " + path.string());
  os << to_json(c).dump(2) << '\n';
}

Config apply_env_overrides(const Config& c,
                           const std::function<const char*(const char*)>& getenv) {
  json flat = to_json(c).flatten();
  bool changed = false;
  for (auto it = flat.begin(); it != flat.end(); ++it) {
    std::string var = "STVO";
    for (char ch : it.key()) {
      var += ch == '/' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    }
    const char* value = getenv(var.c_str());
    if (!value) continue;
    json parsed = json::parse(value, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded() || (it.value().is_string() && !parsed.is_string())) {
      parsed = std::string(value);
    }
    it.value() = parsed;
    changed = true;
  }
  return changed ? config_from_json(flat.unflatten()) : c;
}

}  // namespace stvo
