#include "stvo/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "stvo/error.hpp"
#include "stvo/frame_graph.hpp"
#include "stvo/image_io.hpp"
#include "stvo/matching.hpp"
#include "stvo/network.hpp"
#include "stvo/spatial.hpp"
#include "stvo/temporal.hpp"
#include "stvo/update.hpp"

namespace stvo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct KeyframeExtra {
  std::size_t frame = 0;
  std::optional<fs::path> depth_file;
  Pose gt_pose;
  InverseDepthMap gt_inv_depth;
  DenseArray sam;  // cached attention matrix (cache_sam)
};

struct EdgeResult {
  DenseArray flow, confidence, hidden, local_state;
};

double mean_flow(const DenseArray& flow, const DenseArray& mask) {
  double sum = 0.0;
  std::size_t n = 0;
  const int h = mask.dim(0), w = mask.dim(1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask(y, x) == 0.0) continue;
      sum += std::hypot(flow(0, y, x), flow(1, y, x));
      ++n;
    }
  }
  // Nothing reprojects into the frame: the view has changed completely.
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::infinity();
}

void require_finite(const DenseArray& a, const char* what) {
  if (!a.all_finite()) throw Error(ErrorCode::kNonFinite, what);
}

DenseArray mask_to_confidence(const DenseArray& mask) {
  const int h = mask.dim(0), w = mask.dim(1);
  DenseArray c({2, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) c(0, y, x) = c(1, y, x) = mask(y, x);
  return c;
}

class Runner {
 public:
  Runner(const Config& cfg, const Sequence& seq, const WeightStore* weights)
      : cfg_(cfg), seq_(seq), weights_(weights) {}

  RunArtifacts run(const std::function<void(const FrameRecord&)>& on_frame);

 private:
  bool network() const { return cfg_.flow_source == FlowSource::kNetwork; }

  void setup();
  DenseArray load_image(std::size_t frame) const;
  Pose gt_pose_at(double timestamp) const;
  InverseDepthMap gt_inv_depth(std::size_t frame) const;

  const DenseArray& sam_for(const Keyframe& kf);
  EdgeResult edge_step(const Keyframe& src, const Pose& tgt_pose, const DenseArray& tgt_features,
                       const DenseArray& tgt_motion, const DenseArray& hidden,
                       const DenseArray& sam) const;
  double motion_probe(std::size_t frame, const FeaturePair* feats, KeyframeExtra& extra);
  void iterate(FrameRecord& rec, int iteration);
  void network_round();
  void oracle_targets();

  const Config& cfg_;
  const Sequence& seq_;
  const WeightStore* weights_;
  Config resolved_;
  Camera full_cam_, gcam_;
  Trajectory gt_;
  std::optional<FrameGraph> graph_;
  std::map<int, KeyframeExtra> extra_;
  DenseArray grid_;
};

void Runner::setup() {
  resolved_ = cfg_;
  resolved_.validate();
  if (seq_.frames.empty()) throw Error(ErrorCode::kMissingImage, "sequence has no frames");
  const DenseArray first = load_image(0);
  if (!resolved_.intrinsics.set()) {
    if (!seq_.calibration) {
      throw Error(ErrorCode::kInvalidArgument,
                  "no intrinsics: pass them in the config or add calibration.txt");
    }
    resolved_.intrinsics = *seq_.calibration;
  }
  const Intrinsics& k = resolved_.intrinsics;
  full_cam_ = Camera{k.fx, k.fy, k.cx, k.cy, first.dim(2), first.dim(1)};
  full_cam_.validate();
  gcam_ = full_cam_.downsampled(8);
  grid_ = coordinate_grid(gcam_.height, gcam_.width);

  if (!network()) {
    if (!seq_.groundtruth) {
      throw Error(ErrorCode::kInvalidArgument, "oracle flow needs groundtruth.txt");
    }
    gt_ = read_tum_trajectory(*seq_.groundtruth);
  } else if (!weights_) {
    throw Error(ErrorCode::kInvalidArgument, "network flow needs weights");
  }
  graph_.emplace(gcam_, MotionStateSpec{resolved_.network.motion_dim, resolved_.seed,
                                        resolved_.motion_stddev});
}

DenseArray Runner::load_image(std::size_t frame) const {
  DenseArray img = read_png(seq_.frames.at(frame).image);
  if (frame > 0 && (img.dim(1) != full_cam_.height || img.dim(2) != full_cam_.width)) {
    throw Error(ErrorCode::kBadDimensions,
                "image " + seq_.frames[frame].image.string() + " changes size");
  }
  return img;
}

Pose Runner::gt_pose_at(double t) const {
  auto it = std::lower_bound(gt_.begin(), gt_.end(), t,
                             [](const StampedPose& p, double v) { return p.timestamp < v; });
  const StampedPose* best = nullptr;
  double best_dt = resolved_.max_dt;
  if (it != gt_.end() && std::abs(it->timestamp - t) <= best_dt) {
    best = &*it;
    best_dt = std::abs(it->timestamp - t);
  }
  if (it != gt_.begin() && std::abs((it - 1)->timestamp - t) < best_dt) best = &*(it - 1);
  if (!best) {
    throw Error(ErrorCode::kNoAssociations, "no ground-truth pose near t=" + std::to_string(t));
  }
  return best->pose;
}

InverseDepthMap Runner::gt_inv_depth(std::size_t frame) const {
  DenseArray depth = select_depth_source(DepthSource::kExternal, seq_.frames[frame].depth,
                                         InverseDepthMap(), gcam_.height, gcam_.width);
  for (double& v : depth.data()) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidDepth, "ground-truth depth " + std::to_string(v));
    }
    v = 1.0 / v;
  }
  return InverseDepthMap(std::move(depth));
}

const DenseArray& Runner::sam_for(const Keyframe& kf) {
  KeyframeExtra& ex = extra_.at(kf.index);
  if (resolved_.cache_sam && !ex.sam.empty()) return ex.sam;
  const DenseArray depth = select_depth_source(resolved_.depth_source, ex.depth_file,
                                               kf.inv_depth, gcam_.height, gcam_.width);
  ex.sam = build_sam(depth, weights_->at("sam.w_q"), weights_->at("sam.w_k"),
                     resolved_.sam_normalization, resolved_.memory_budget);
  return ex.sam;
}

EdgeResult Runner::edge_step(const Keyframe& src, const Pose& tgt_pose,
                             const DenseArray& tgt_features, const DenseArray& tgt_motion,
                             const DenseArray& hidden, const DenseArray& sam) const {
  const NetworkDims& dims = resolved_.network;
  const WeightStore& w = *weights_;
  const InducedFlow ind = induced_flow(src.pose, tgt_pose, src.inv_depth, gcam_);
  const DenseArray coords = ops::add(grid_, ind.flow);
  const CorrelationSampler sampler(src.features, tgt_features, dims.corr_levels);
  const DenseArray corr = sampler.lookup(coords, dims.corr_radius);

  const ops::WarpResult warped = warp_motion(src.motion_state, ind.flow);
  const DenseArray mt = temporal_motion_state(src.motion_state, warped.values, tgt_motion);
  const MotionFeature mf = temporal_encode(corr, mt, warped.mask, w, dims.motion_feature_dim);

  const DenseArray cs = activate(src.context, sam, w.at("sam.alpha_context")[0]);
  const DenseArray fst = activate(mf.motion_feature, sam, w.at("sam.alpha_motion")[0]);
  const DenseArray h =
      hidden.empty() ? DenseArray({dims.hidden_dim, gcam_.height, gcam_.width}) : hidden;
  UpdateResult u = update_step(h, fst, cs, mt, corr, w);
  return {ops::add(ind.flow, u.revision), std::move(u.confidence), std::move(u.hidden),
          mf.local_state};
}

double Runner::motion_probe(std::size_t frame, const FeaturePair* feats, KeyframeExtra& extra) {
  if (graph_->empty()) return 0.0;
  const Keyframe& last = graph_->keyframes().back();
  if (!network()) {
    const InducedFlow f = induced_flow(extra_.at(last.index).gt_pose, extra.gt_pose,
                                       extra_.at(last.index).gt_inv_depth, gcam_);
    return mean_flow(f.flow, f.mask);
  }
  (void)frame;
  // One update step on the (last keyframe -> candidate) edge.
  const Pose guess = graph_->extrapolated_pose();
  const DenseArray motion =
      init_motion_state(resolved_.seed, last.index + 1, resolved_.network.motion_dim,
                        gcam_.height, gcam_.width, resolved_.motion_stddev);
  const EdgeResult r = edge_step(last, guess, feats->features, motion, DenseArray(),
                                 sam_for(last));
  const InducedFlow ind = induced_flow(last.pose, guess, last.inv_depth, gcam_);
  return mean_flow(r.flow, ind.mask);
}

void Runner::oracle_targets() {
  for (Edge& e : graph_->edges()) {
    if (!e.flow.empty()) continue;
    const KeyframeExtra& si = extra_.at(e.source);
    const KeyframeExtra& tj = extra_.at(e.target);
    const InducedFlow f = induced_flow(si.gt_pose, tj.gt_pose, si.gt_inv_depth, gcam_);
    e.flow = f.flow;
    e.confidence = mask_to_confidence(f.mask);
  }
}

void Runner::network_round() {
  FrameGraph& g = *graph_;
  const auto sets = source_edge_sets(g);
  std::map<int, DenseArray> next_state;
  std::map<std::pair<int, int>, EdgeResult> results;
  for (const SourceEdgeSet& set : sets) {
    const Keyframe& src = g.keyframe(set.source);
    const DenseArray& sam = sam_for(src);
    std::vector<const DenseArray*> locals;
    for (const Edge* e : set.edges) {
      const Keyframe& tgt = g.keyframe(e->target);
      auto [it, _] = results.emplace(
          std::make_pair(e->source, e->target),
          edge_step(src, tgt.pose, tgt.features, tgt.motion_state, e->hidden, sam));
      locals.push_back(&it->second.local_state);
    }
    next_state[set.source] = propagate_back(locals);
  }
  // Barrier: every edge has read the iteration-k states before any update.
  for (Edge& e : g.edges()) {
    EdgeResult& r = results.at({e.source, e.target});
    e.flow = std::move(r.flow);
    e.confidence = std::move(r.confidence);
    e.hidden = std::move(r.hidden);
  }
  for (auto& [index, state] : next_state) g.keyframe(index).motion_state = std::move(state);
}

void Runner::iterate(FrameRecord& rec, int iteration) {
  (void)iteration;
  FrameGraph& g = *graph_;
  if (network()) {
    network_round();
  } else {
    oracle_targets();
  }

  BAProblem pb;
  pb.camera = gcam_;
  std::map<int, int> slot;
  for (const Keyframe& kf : g.keyframes()) {
    slot[kf.index] = static_cast<int>(pb.poses.size());
    pb.poses.push_back(kf.pose);
    pb.inv_depths.push_back(kf.inv_depth);
    pb.fixed.push_back(pb.poses.size() == 1);
  }
  for (const Edge& e : g.edges()) {
    BAEdge be;
    be.source = slot.at(e.source);
    be.target = slot.at(e.target);
    be.target_coords = ops::add(grid_, e.flow);
    be.weights = e.confidence;
    pb.edges.push_back(std::move(be));
  }
  rec.ba.push_back(run_dba(pb, resolved_.inner_iters,
                           Damping{resolved_.pose_damping, resolved_.depth_damping}));
  for (Keyframe& kf : g.keyframes()) {
    kf.pose = pb.poses[slot.at(kf.index)];
    kf.inv_depth = std::move(pb.inv_depths[slot.at(kf.index)]);
  }

  if (network()) {
    for (const Edge& e : g.edges()) {
      require_finite(e.flow, "edge flow");
      require_finite(e.confidence, "edge confidence");
      require_finite(e.hidden, "edge hidden state");
    }
    for (const Keyframe& kf : g.keyframes()) {
      require_finite(kf.motion_state, "motion state");
      require_finite(kf.inv_depth.values(), "inverse depth");
    }
  }
}

RunArtifacts Runner::run(const std::function<void(const FrameRecord&)>& on_frame) {
  const auto t0 = std::chrono::steady_clock::now();
  setup();
  RunArtifacts out;
  const KeyframePolicy policy{resolved_.tau_kf, resolved_.window, resolved_.neighbors};

  for (std::size_t f = 0; f < seq_.frames.size(); f += static_cast<std::size_t>(resolved_.stride)) {
    FrameRecord rec;
    rec.frame = f;
    rec.timestamp = seq_.frames[f].timestamp;
    int iteration = -1;
    try {
      KeyframeExtra extra;
      extra.frame = f;
      extra.depth_file = seq_.frames[f].depth;
      if (resolved_.depth_source == DepthSource::kExternal) {
        // Fail early (MissingDepthFile) rather than at the first attention build.
        select_depth_source(DepthSource::kExternal, extra.depth_file, InverseDepthMap(),
                            gcam_.height, gcam_.width);
      }
      std::optional<FeaturePair> feats;
      if (network()) {
        feats = extract_features(load_image(f), *weights_);
      } else {
        extra.gt_pose = gt_pose_at(rec.timestamp);
        extra.gt_inv_depth = gt_inv_depth(f);
      }
      rec.motion_probe = motion_probe(f, feats ? &*feats : nullptr, extra);

      KeyframeInit init;
      init.timestamp = rec.timestamp;
      if (feats) {
        init.features = std::move(feats->features);
        init.context = std::move(feats->context);
      }
      rec.keyframe = graph_->admit_frame(std::move(init), rec.motion_probe, policy);
      if (rec.keyframe) {
        extra_[*rec.keyframe] = std::move(extra);
        graph_->build_edges(resolved_.neighbors);
        if (graph_->size() >= 2) {
          for (iteration = 0; iteration < resolved_.iterations; ++iteration) iterate(rec, iteration);
          iteration = -1;
        }
        for (int removed : graph_->evict_oldest(resolved_.window)) extra_.erase(removed);
      }
    } catch (const Error& e) {
      std::string where = "frame " + std::to_string(f);
      if (iteration >= 0) where += " iteration " + std::to_string(iteration);
      const std::string_view what = e.what();
      const std::size_t prefix = to_string(e.code()).size() + 2;
      throw Error(e.code(), where + ": " + std::string(what.substr(std::min(prefix, what.size()))));
    }
    for (const Keyframe& kf : graph_->keyframes()) {
      rec.motion_state_max_abs = std::max(rec.motion_state_max_abs, kf.motion_state.max_abs());
    }
    if (on_frame) on_frame(rec);
    out.frames.push_back(std::move(rec));
  }

  out.config = resolved_;
  out.trajectory = graph_->trajectory();
  double motion_max = 0.0;
  std::size_t keyframes = 0, ba_calls = 0;
  for (const FrameRecord& r : out.frames) {
    motion_max = std::max(motion_max, r.motion_state_max_abs);
    keyframes += r.keyframe.has_value();
    ba_calls += r.ba.size();
  }
  bool finite = std::isfinite(motion_max);
  for (const StampedPose& sp : out.trajectory) {
    finite = finite && sp.pose.translation().allFinite() &&
             sp.pose.rotation().quaternion().coeffs().allFinite();
  }
  out.metrics = {
      {"frames", out.frames.size()},
      {"keyframes", keyframes},
      {"ba_calls", ba_calls},
      {"all_finite", finite},
      {"motion_state_max_abs", motion_max},
      {"ba_cost_non_increasing", ba_cost_non_increasing(out.frames)},
      {"flow_source", to_string(resolved_.flow_source)},
      {"depth_source", to_string(resolved_.depth_source)},
  };
  if (seq_.groundtruth && out.trajectory.size() >= 3) {
    try {
      const AteResult a = ate(out.trajectory, read_tum_trajectory(*seq_.groundtruth),
                              resolved_.max_dt);
      out.metrics["ate"] = {{"rmse", a.rmse}, {"mean", a.mean}, {"median", a.median},
                            {"max", a.max},   {"scale", a.alignment.scale}, {"pairs", a.pairs}};
    } catch (const Error& e) {
      out.metrics["ate_error"] = e.what();
    }
  }
  out.metrics["runtime_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

json report_json(const BAReport& r) {
  json steps = json::array();
  for (const BAIteration& it : r.iterations) {
    steps.push_back({{"cost_before", it.cost_before},
                     {"cost_after", it.cost_after},
                     {"pose_update_norm", it.pose_update_norm},
                     {"depth_update_norm", it.depth_update_norm},
                     {"pose_damping", it.damping.pose},
                     {"depth_damping", it.damping.depth},
                     {"accepted", it.accepted}});
  }
  return {{"initial_cost", r.initial_cost},
          {"final_cost", r.final_cost},
          {"converged", r.converged},
          {"steps", steps}};
}

}  // namespace

RunArtifacts run_vo(const Config& config, const Sequence& sequence, const WeightStore* weights,
                    const std::function<void(const FrameRecord&)>& on_frame) {
  if (config.flow_source == FlowSource::kOracle) weights = nullptr;
  Runner runner(config, sequence, weights);
  return runner.run(on_frame);
}

bool ba_cost_non_increasing(const std::vector<FrameRecord>& frames) {
  for (const FrameRecord& f : frames) {
    for (const BAReport& r : f.ba) {
      if (r.final_cost > r.initial_cost) return false;
      double cost = r.initial_cost;
      for (const BAIteration& it : r.iterations) {
        if (!it.accepted) continue;
        if (it.cost_after > cost) return false;
        cost = it.cost_after;
      }
    }
  }
  return true;
}

void write_artifacts(const fs::path& dir, const RunArtifacts& run) {
  fs::create_directories(dir);
  write_tum_trajectory(dir / "trajectory.txt", run.trajectory);
  save_config(dir / "config.json", run.config);

  json frames = json::array();
  for (const FrameRecord& f : run.frames) {
    json iters = json::array();
    for (const BAReport& r : f.ba) iters.push_back(report_json(r));
    frames.push_back({{"frame", f.frame},
                      {"timestamp", f.timestamp},
                      {"motion_probe", std::isfinite(f.motion_probe) ? json(f.motion_probe) : json()},
                      {"keyframe", f.keyframe ? json(*f.keyframe) : json()},
                      {"motion_state_max_abs", f.motion_state_max_abs},
                      {"iterations", iters}});
  }
  std::ofstream(dir / "ba_reports.json") << frames.dump(1) << '\n';
  std::ofstream(dir / "metrics.json") << run.metrics.dump(2) << '\n';
}

}  // namespace stvo
