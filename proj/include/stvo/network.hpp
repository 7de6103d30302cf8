#pragma once

#include <cstdint>

#include "stvo/weights.hpp"

namespace stvo {

// Channel widths and correlation settings for the learned modules.
struct NetworkDims {
  int feature_dim = 128;         // D_f, matching features
  int context_dim = 128;         // D_c, context features
  int motion_dim = 64;           // D_m, per-keyframe motion state
  int motion_feature_dim = 128;  // D_M, temporal motion feature
  int attention_dim = 64;        // D_in, SAM query/key width
  int hidden_dim = 128;          // D_h, GRU state
  int corr_levels = 4;           // L
  int corr_radius = 3;           // R
  int encoder_width = 64;        // widest feature-encoder stage

  int corr_channels() const {
    return (2 * corr_radius + 1) * (2 * corr_radius + 1) * corr_levels;
  }
  // Input to the GRU: F_ST, C_S, M_T, F_corr.
  int update_input_channels() const {
    return motion_feature_dim + context_dim + 3 * motion_dim + corr_channels();
  }
  // Input to the temporal encoder: F_corr, M_T and the warp-validity mask.
  int temporal_input_channels() const { return corr_channels() + 3 * motion_dim + 1; }

  bool operator==(const NetworkDims&) const = default;
};

// Seeded initialization of every learned tensor: Kaiming-uniform (a = sqrt 5)
// conv kernels, zero biases, zero SAM blend scalars.
WeightStore init_network_weights(const NetworkDims& dims, std::uint64_t seed);

}  // namespace stvo
