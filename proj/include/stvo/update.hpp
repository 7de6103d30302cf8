#pragma once

#include <random>

#include "stvo/network.hpp"
#include "stvo/tape.hpp"
#include "stvo/weights.hpp"

namespace stvo {

struct ConvHeadParams {
  ad::Var w1, b1, w2, b2;
};

struct UpdateParams {
  ad::GruParams gru;
  ConvHeadParams revision;
  ConvHeadParams confidence;
  static UpdateParams bind(ad::Tape& t, const WeightStore& weights);
};

struct UpdateVars {
  ad::Var hidden;      // h' [D_h,H,W]
  ad::Var revision;    // r  [2,H,W]
  ad::Var confidence;  // w  [2,H,W], in (0,1)
};

// GRU over concat(F_ST, C_S, M_T, F_corr), then two conv3x3-relu-conv3x3
// heads on the new hidden state: revision flow, and sigmoid confidence.
UpdateVars update_step(ad::Tape& t, ad::Var hidden, ad::Var spatio_temporal, ad::Var context,
                       ad::Var temporal_state, ad::Var corr, const UpdateParams& p);

struct UpdateResult {
  DenseArray hidden;
  DenseArray revision;
  DenseArray confidence;
};
UpdateResult update_step(const DenseArray& hidden, const DenseArray& spatio_temporal,
                         const DenseArray& context, const DenseArray& temporal_state,
                         const DenseArray& corr, const WeightStore& weights);

// Target correspondence field: pixel grid + current flow + revision.
DenseArray apply_revision(const DenseArray& flow, const DenseArray& revision);

void add_update_weights(WeightStore& store, const NetworkDims& dims, std::mt19937_64& rng);

}  // namespace stvo
