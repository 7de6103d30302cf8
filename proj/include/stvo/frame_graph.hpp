#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "stvo/camera.hpp"
#include "stvo/lie.hpp"
#include "stvo/tensor.hpp"

namespace stvo {

struct Keyframe {
  int index = 0;
  double timestamp = 0.0;
  DenseArray features;  // matching features [D_f,H,W] (empty in oracle mode)
  DenseArray context;   // context features [D_c,H,W]
  Pose pose;
  InverseDepthMap inv_depth;
  DenseArray motion_state;  // [D_m,H,W]
};

struct Edge {
  int source = 0;
  int target = 0;
  DenseArray flow;        // [2,H,W], latest estimated flow (induced + revision)
  DenseArray confidence;  // [2,H,W]
  DenseArray hidden;      // GRU state, empty until the first update
};

struct SourceEdgeSet {
  int source = 0;
  std::vector<const Edge*> edges;  // ascending target timestamp
};

struct StampedPose {
  double timestamp = 0.0;
  Pose pose;  // world-to-camera
};

struct KeyframePolicy {
  double tau_kf = 2.4;       // mean flow (px at 1/8 res) needed to admit
  int window_capacity = 10;  // live keyframes kept
  int neighbors = 3;         // r: preceding keyframes each frame links to
};

struct MotionStateSpec {
  int channels = 64;
  std::uint64_t seed = 0;
  double stddev = 0.1;
};

struct KeyframeInit {
  double timestamp = 0.0;
  DenseArray features;
  DenseArray context;
};

// Keyframes plus directed co-visibility edges over a sliding window.
// Single writer; const access is safe to share.
class FrameGraph {
 public:
  FrameGraph(Camera cam, MotionStateSpec motion);

  // Admits the frame iff the graph is empty or `mean_flow` exceeds
  // policy.tau_kf. New pose: constant-velocity extrapolation of the last two
  // keyframes; new inverse depth: the mean of the previous keyframe's.
  std::optional<int> admit_frame(KeyframeInit init, double mean_flow,
                                 const KeyframePolicy& policy);

  // Rebuilds the edge set: every live keyframe links to its `r` temporally
  // nearest preceding live keyframes, in both directions. Edges present
  // before and after keep their state; new edges start empty.
  const std::vector<Edge>& build_edges(int r);

  // Removes the oldest keyframes until at most `capacity` remain. Their
  // last poses are frozen into the trajectory.
  std::vector<int> evict_oldest(int capacity);

  // Pose that admit_frame would assign to the next keyframe.
  Pose extrapolated_pose() const;

  bool empty() const { return frames_.empty(); }
  std::size_t size() const { return frames_.size(); }
  const std::vector<Keyframe>& keyframes() const { return frames_; }
  std::vector<Keyframe>& keyframes() { return frames_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::vector<Edge>& edges() { return edges_; }
  const Camera& camera() const { return cam_; }

  // Live slot for a keyframe index, or -1.
  int slot_of(int index) const;
  const Keyframe& keyframe(int index) const;
  Keyframe& keyframe(int index);

  // Frozen (evicted) plus live keyframe poses, in timestamp order.
  std::vector<StampedPose> trajectory() const;

 private:
  Camera cam_;
  MotionStateSpec motion_;
  std::vector<Keyframe> frames_;
  std::vector<Edge> edges_;
  std::vector<StampedPose> retired_;
  int next_index_ = 0;
};

// E_t for every source t: sets ascending by source timestamp, edges within a
// set ascending by target timestamp. Every edge appears in exactly one set.
std::vector<SourceEdgeSet> source_edge_sets(const FrameGraph& graph);

}  // namespace stvo
