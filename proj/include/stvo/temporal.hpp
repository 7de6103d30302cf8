#pragma once

// Temporal propagation: per-keyframe motion states are warped along every
// edge of their source edge set, encoded together with the correlation
// features, and the per-edge local states are averaged back into the source
// keyframe for the next iteration.

#include <cstdint>
#include <vector>

#include "stvo/network.hpp"
#include "stvo/ops.hpp"
#include "stvo/tape.hpp"
#include "stvo/weights.hpp"

namespace stvo {

// Seeded N(0, stddev^2) raster [channels,H,W]; deterministic per
// (seed, keyframe_index).
DenseArray init_motion_state(std::uint64_t seed, int keyframe_index, int channels,
                             int height, int width, double stddev = 0.1);

// Dynamic state M_{m->n}: the source state warped by the current flow.
// Out-of-bounds samples are zero and flagged in the mask.
ops::WarpResult warp_motion(const DenseArray& source_state, const DenseArray& flow);

// M_T = concat(m_m, M_{m->n}, m_n), blocks in exactly that order.
DenseArray temporal_motion_state(const DenseArray& source_state,
                                 const DenseArray& warped_state,
                                 const DenseArray& target_state);

struct TemporalEncoderParams {
  ad::Var w1, b1, w2, b2;
  static TemporalEncoderParams bind(ad::Tape& t, const WeightStore& weights);
};

struct MotionFeatureVars {
  ad::Var motion_feature;  // F_motion [D_M,H,W]
  ad::Var local_state;     // m_{m->n} for the next iteration [D_m,H,W]
};

// Two 3x3 conv layers with a ReLU between them over concat(F_corr, M_T,
// mask); the output is split into F_motion (first D_M channels) and the local
// next state (last D_m channels).
MotionFeatureVars temporal_encode(ad::Tape& t, ad::Var corr, ad::Var temporal_state,
                                  ad::Var warp_mask, const TemporalEncoderParams& p,
                                  int motion_feature_dim);

struct MotionFeature {
  DenseArray motion_feature;
  DenseArray local_state;
};
// Tape-free forward pass. `warp_mask` is [H,W].
MotionFeature temporal_encode(const DenseArray& corr, const DenseArray& temporal_state,
                              const DenseArray& warp_mask, const WeightStore& weights,
                              int motion_feature_dim);

// m_m^{k+1} = mean of the local states over the source edge set. Throws
// EmptyTargetSet when there are none; the caller keeps the previous state.
DenseArray propagate_back(const std::vector<const DenseArray*>& local_states);

// Adds the temporal encoder tensors ("tpm.enc1", "tpm.enc2").
void add_temporal_encoder_weights(WeightStore& store, const NetworkDims& dims,
                                  std::mt19937_64& rng);

}  // namespace stvo
