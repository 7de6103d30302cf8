#include "stvo/frame_graph.hpp"

#include <algorithm>
#include <map>
#include <utility>

#include "stvo/error.hpp"
#include "stvo/temporal.hpp"

namespace stvo {

FrameGraph::FrameGraph(Camera cam, MotionStateSpec motion)
    : cam_(cam), motion_(motion) {
  cam_.validate();
}

Pose FrameGraph::extrapolated_pose() const {
  if (frames_.empty()) return Pose::identity();
  const Pose& last = frames_.back().pose;
  if (frames_.size() == 1) return last;
  const Pose& prev = frames_[frames_.size() - 2].pose;
  return (last * prev.inverse()) * last;
}

std::optional<int> FrameGraph::admit_frame(KeyframeInit init, double mean_flow,
                                           const KeyframePolicy& policy) {
  if (!frames_.empty()) {
    if (!(mean_flow > policy.tau_kf)) return std::nullopt;
    if (!(init.timestamp > frames_.back().timestamp)) {
      throw Error(ErrorCode::kInvalidArgument, "keyframe timestamps must increase");
    }
  }
  Keyframe kf;
  kf.index = next_index_++;
  kf.timestamp = init.timestamp;
  kf.features = std::move(init.features);
  kf.context = std::move(init.context);
  kf.pose = extrapolated_pose();
  const double d0 = frames_.empty() ? 1.0 : frames_.back().inv_depth.mean();
  kf.inv_depth = InverseDepthMap::constant(cam_.height, cam_.width, d0);
  kf.motion_state = init_motion_state(motion_.seed, kf.index, motion_.channels,
                                      cam_.height, cam_.width, motion_.stddev);
  frames_.push_back(std::move(kf));
  return frames_.back().index;
}

const std::vector<Edge>& FrameGraph::build_edges(int r) {
  if (frames_.empty()) throw Error(ErrorCode::kInvalidArgument, "build_edges on empty graph");
  std::map<std::pair<int, int>, Edge> previous;
  for (Edge& e : edges_) previous.emplace(std::make_pair(e.source, e.target), std::move(e));

  std::vector<std::pair<int, int>> pairs;
  for (std::size_t s = 0; s < frames_.size(); ++s) {
    const std::size_t first = s >= static_cast<std::size_t>(r) ? s - r : 0;
    for (std::size_t t = first; t < s; ++t) {
      pairs.emplace_back(frames_[s].index, frames_[t].index);
      pairs.emplace_back(frames_[t].index, frames_[s].index);
    }
  }
  std::sort(pairs.begin(), pairs.end());

  edges_.clear();
  for (const auto& [i, j] : pairs) {
    auto it = previous.find({i, j});
    if (it != previous.end()) {
      edges_.push_back(std::move(it->second));
    } else {
      Edge e;
      e.source = i;
      e.target = j;
      edges_.push_back(std::move(e));
    }
  }
  return edges_;
}

std::vector<int> FrameGraph::evict_oldest(int capacity) {
  std::vector<int> removed;
  while (frames_.size() > static_cast<std::size_t>(std::max(capacity, 0))) {
    const Keyframe& kf = frames_.front();
    retired_.push_back({kf.timestamp, kf.pose});
    removed.push_back(kf.index);
    frames_.erase(frames_.begin());
  }
  if (!removed.empty()) {
    std::erase_if(edges_, [&](const Edge& e) {
      return std::find(removed.begin(), removed.end(), e.source) != removed.end() ||
             std::find(removed.begin(), removed.end(), e.target) != removed.end();
    });
  }
  return removed;
}

int FrameGraph::slot_of(int index) const {
  auto it = std::lower_bound(frames_.begin(), frames_.end(), index,
                             [](const Keyframe& k, int i) { return k.index < i; });
  if (it == frames_.end() || it->index != index) return -1;
  return static_cast<int>(it - frames_.begin());
}

const Keyframe& FrameGraph::keyframe(int index) const {
  const int s = slot_of(index);
  if (s < 0) throw Error(ErrorCode::kInvalidArgument, "no live keyframe " + std::to_string(index));
  return frames_[s];
}

Keyframe& FrameGraph::keyframe(int index) {
  return const_cast<Keyframe&>(std::as_const(*this).keyframe(index));
}

std::vector<StampedPose> FrameGraph::trajectory() const {
  std::vector<StampedPose> out = retired_;
  for (const Keyframe& kf : frames_) out.push_back({kf.timestamp, kf.pose});
  return out;
}

std::vector<SourceEdgeSet> source_edge_sets(const FrameGraph& graph) {
  std::map<int, double> stamp;
  for (const Keyframe& kf : graph.keyframes()) stamp[kf.index] = kf.timestamp;

  std::vector<const Edge*> sorted;
  for (const Edge& e : graph.edges()) sorted.push_back(&e);
  std::stable_sort(sorted.begin(), sorted.end(), [&](const Edge* a, const Edge* b) {
    const double sa = stamp.at(a->source), sb = stamp.at(b->source);
    if (sa != sb) return sa < sb;
    return stamp.at(a->target) < stamp.at(b->target);
  });

  std::vector<SourceEdgeSet> sets;
  for (const Edge* e : sorted) {
    if (sets.empty() || sets.back().source != e->source) sets.push_back({e->source, {}});
    sets.back().edges.push_back(e);
  }
  return sets;
}

}  // namespace stvo
