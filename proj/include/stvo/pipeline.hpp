#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "json.hpp"
#include "stvo/config.hpp"
#include "stvo/dataset.hpp"
#include "stvo/dba.hpp"
#include "stvo/eval.hpp"
#include "stvo/weights.hpp"

namespace stvo {

struct FrameRecord {
  std::size_t frame = 0;  // position in the sequence
  double timestamp = 0.0;
  double motion_probe = 0.0;  // mean flow to the last keyframe, px at 1/8 res
  std::optional<int> keyframe;
  std::vector<BAReport> ba;  // one per update iteration
  double motion_state_max_abs = 0.0;
};

struct RunArtifacts {
  Config config;  // resolved (intrinsics filled in)
  Trajectory trajectory;
  std::vector<FrameRecord> frames;
  nlohmann::json metrics;
};

// The per-frame loop: features, keyframe policy, edge rebuild, then
// `iterations` rounds of induced flow -> correlation -> temporal propagation
// -> spatial activation -> GRU revision -> bundle adjustment, and finally
// window eviction. Oracle flow mode replaces the network output by
// ground-truth correspondences from groundtruth.txt and the depth files and
// never touches network weights. Errors are rethrown with the frame index
// and iteration attached.
RunArtifacts run_vo(const Config& config, const Sequence& sequence,
                    const WeightStore* weights = nullptr,
                    const std::function<void(const FrameRecord&)>& on_frame = {});

// trajectory.txt, config.json, ba_reports.json, metrics.json.
void write_artifacts(const std::filesystem::path& dir, const RunArtifacts& run);

// True when every BA call's accepted steps never raised the cost.
bool ba_cost_non_increasing(const std::vector<FrameRecord>& frames);

}  // namespace stvo
