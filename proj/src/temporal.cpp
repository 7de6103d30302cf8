#include "stvo/temporal.hpp"

#include <random>

#include "stvo/error.hpp"

namespace stvo {

DenseArray init_motion_state(std::uint64_t seed, int keyframe_index, int channels,
                             int height, int width, double stddev) {
  DenseArray m({channels, height, width});
  if (stddev == 0.0) return m;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(keyframe_index), 0x6d6f7469u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

ops::WarpResult warp_motion(const DenseArray& source_state, const DenseArray& flow) {
  if (source_state.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch, "motion state must be [D_m,H,W]");
  }
  require_shape(flow, {2, source_state.dim(1), source_state.dim(2)}, "warp_motion flow");
  return ops::bilinear_warp(source_state, flow);
}

DenseArray temporal_motion_state(const DenseArray& source_state,
                                 const DenseArray& warped_state,
                                 const DenseArray& target_state) {
  require_same_shape(source_state, warped_state, "temporal state (warped)");
  require_same_shape(source_state, target_state, "temporal state (target)");
  return ops::concat_channels({&source_state, &warped_state, &target_state});
}

TemporalEncoderParams TemporalEncoderParams::bind(ad::Tape& t, const WeightStore& w) {
  return {t.param(w.at("tpm.enc1.weight")), t.param(w.at("tpm.enc1.bias")),
          t.param(w.at("tpm.enc2.weight")), t.param(w.at("tpm.enc2.bias"))};
}

MotionFeatureVars temporal_encode(ad::Tape& t, ad::Var corr, ad::Var temporal_state,
                                  ad::Var warp_mask, const TemporalEncoderParams& p,
                                  int motion_feature_dim) {
  const DenseArray& c = t.value(corr);
  const DenseArray& m = t.value(temporal_state);
  if (c.rank() != 3 || m.rank() != 3 || c.dim(1) != m.dim(1) || c.dim(2) != m.dim(2)) {
    throw Error(ErrorCode::kShapeMismatch, "temporal_encode spatial dims disagree");
  }
  const auto spec1 = ops::Conv2dSpec::same(t.value(p.w1).dim(2));
  const auto spec2 = ops::Conv2dSpec::same(t.value(p.w2).dim(2));
  ad::Var x = ad::concat_channels(t, {corr, temporal_state, warp_mask});
  ad::Var hidden = ad::relu(t, ad::conv2d(t, x, p.w1, p.b1, spec1));
  ad::Var out = ad::conv2d(t, hidden, p.w2, p.b2, spec2);
  const int total = t.value(out).dim(0);
  if (motion_feature_dim <= 0 || motion_feature_dim >= total) {
    throw Error(ErrorCode::kShapeMismatch, "temporal encoder output split");
  }
  return {ad::slice_channels(t, out, 0, motion_feature_dim),
          ad::slice_channels(t, out, motion_feature_dim, total)};
}

MotionFeature temporal_encode(const DenseArray& corr, const DenseArray& temporal_state,
                              const DenseArray& warp_mask, const WeightStore& weights,
                              int motion_feature_dim) {
  ad::Tape t(/*recording=*/false);
  const auto p = TemporalEncoderParams::bind(t, weights);
  ad::Var mask = t.input(warp_mask.reshaped({1, warp_mask.dim(0), warp_mask.dim(1)}));
  auto out = temporal_encode(t, t.input(corr), t.input(temporal_state), mask, p,
                             motion_feature_dim);
  return {t.value(out.motion_feature), t.value(out.local_state)};
}

DenseArray propagate_back(const std::vector<const DenseArray*>& local_states) {
  if (local_states.empty()) {
    throw Error(ErrorCode::kEmptyTargetSet, "source frame has no target frames");
  }
  DenseArray mean = *local_states.front();
  for (std::size_t k = 1; k < local_states.size(); ++k) {
    require_same_shape(mean, *local_states[k], "propagate_back");
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += (*local_states[k])[i];
  }
  if (local_states.size() > 1) {
    const double inv = 1.0 / static_cast<double>(local_states.size());
    for (double& v : mean.data()) v *= inv;
  }
  return mean;
}

void add_temporal_encoder_weights(WeightStore& store, const NetworkDims& dims,
                                  std::mt19937_64& rng) {
  store.add_conv("tpm.enc1", dims.motion_feature_dim, dims.temporal_input_channels(), 3, rng);
  store.add_conv("tpm.enc2", dims.motion_feature_dim + dims.motion_dim,
                 dims.motion_feature_dim, 3, rng);
}

}  // namespace stvo
