#include "stvo/update.hpp"

#include <algorithm>
#include <string>

#include "stvo/error.hpp"

namespace stvo {

namespace {

ConvHeadParams bind_head(ad::Tape& t, const WeightStore& w, const std::string& p) {
  return {t.param(w.at(p + ".1.weight")), t.param(w.at(p + ".1.bias")),
          t.param(w.at(p + ".2.weight")), t.param(w.at(p + ".2.bias"))};
}

ad::Var run_head(ad::Tape& t, ad::Var x, const ConvHeadParams& h) {
  ad::Var y = ad::conv2d(t, x, h.w1, h.b1, ops::Conv2dSpec::same(t.value(h.w1).dim(2)));
  y = ad::relu(t, y);
  return ad::conv2d(t, y, h.w2, h.b2, ops::Conv2dSpec::same(t.value(h.w2).dim(2)));
}

}  // namespace

UpdateParams UpdateParams::bind(ad::Tape& t, const WeightStore& w) {
  UpdateParams p;
  p.gru = {t.param(w.at("upd.gru.z.weight")), t.param(w.at("upd.gru.z.bias")),
           t.param(w.at("upd.gru.r.weight")), t.param(w.at("upd.gru.r.bias")),
           t.param(w.at("upd.gru.q.weight")), t.param(w.at("upd.gru.q.bias"))};
  p.revision = bind_head(t, w, "upd.revision");
  p.confidence = bind_head(t, w, "upd.confidence");
  return p;
}

UpdateVars update_step(ad::Tape& t, ad::Var hidden, ad::Var spatio_temporal, ad::Var context,
                       ad::Var temporal_state, ad::Var corr, const UpdateParams& p) {
  const DenseArray& h = t.value(hidden);
  for (ad::Var v : {spatio_temporal, context, temporal_state, corr}) {
    const DenseArray& x = t.value(v);
    if (x.rank() != 3 || h.rank() != 3 || x.dim(1) != h.dim(1) || x.dim(2) != h.dim(2)) {
      throw Error(ErrorCode::kShapeMismatch, "update_step inputs disagree spatially");
    }
  }
  ad::Var input = ad::concat_channels(t, {spatio_temporal, context, temporal_state, corr});
  ad::Var next = ad::gru_cell(t, hidden, input, p.gru);
  return {next, run_head(t, next, p.revision),
          ad::sigmoid(t, run_head(t, next, p.confidence))};
}

UpdateResult update_step(const DenseArray& hidden, const DenseArray& spatio_temporal,
                         const DenseArray& context, const DenseArray& temporal_state,
                         const DenseArray& corr, const WeightStore& weights) {
  ad::Tape t(/*recording=*/false);
  const auto p = UpdateParams::bind(t, weights);
  auto out = update_step(t, t.input(hidden), t.input(spatio_temporal), t.input(context),
                         t.input(temporal_state), t.input(corr), p);
  return {t.value(out.hidden), t.value(out.revision), t.value(out.confidence)};
}

DenseArray apply_revision(const DenseArray& flow, const DenseArray& revision) {
  require_same_shape(flow, revision, "apply_revision");
  if (flow.rank() != 3 || flow.dim(0) != 2) {
    throw Error(ErrorCode::kShapeMismatch, "flow must be [2,H,W]");
  }
  DenseArray target(flow.shape());
  const int h = flow.dim(1), w = flow.dim(2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      target(0, y, x) = x + flow(0, y, x) + revision(0, y, x);
      target(1, y, x) = y + flow(1, y, x) + revision(1, y, x);
    }
  }
  return target;
}

void add_update_weights(WeightStore& store, const NetworkDims& dims, std::mt19937_64& rng) {
  const int hd = dims.hidden_dim;
  const int gru_in = hd + dims.update_input_channels();
  store.add_conv("upd.gru.z", hd, gru_in, 3, rng);
  store.add_conv("upd.gru.r", hd, gru_in, 3, rng);
  store.add_conv("upd.gru.q", hd, gru_in, 3, rng);
  const int head = std::max(hd / 2, 1);
  store.add_conv("upd.revision.1", head, hd, 3, rng);
  store.add_conv("upd.revision.2", 2, head, 3, rng);
  store.add_conv("upd.confidence.1", head, hd, 3, rng);
  store.add_conv("upd.confidence.2", 2, head, 3, rng);
}

}  // namespace stvo
