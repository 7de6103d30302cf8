#include <cmath>
#include <random>

#include "doctest.h"
#include "stvo/error.hpp"
#include "stvo/update.hpp"
#include "test_util.hpp"

using namespace stvo;
using testutil::max_abs_diff;
using testutil::random_array;

namespace {

NetworkDims tiny_dims() {
  NetworkDims d;
  d.hidden_dim = 4;
  d.motion_feature_dim = 3;
  d.context_dim = 2;
  d.motion_dim = 1;
  d.corr_levels = 1;
  d.corr_radius = 0;
  return d;
}

WeightStore update_weights(std::uint64_t seed, bool random_biases = true) {
  WeightStore w;
  std::mt19937_64 rng(seed);
  add_update_weights(w, tiny_dims(), rng);
  if (random_biases) {
    for (const std::string& n : w.names())
      if (n.ends_with(".bias")) w.set(n, random_array(w.at(n).shape(), rng, -0.3, 0.3));
  }
  return w;
}

struct Inputs {
  DenseArray hidden, st, context, temporal, corr;
};

Inputs random_inputs(int h, int w, std::mt19937_64& rng, double scale = 1.0) {
  const NetworkDims d = tiny_dims();
  return {random_array({d.hidden_dim, h, w}, rng, -scale, scale),
          random_array({d.motion_feature_dim, h, w}, rng, -scale, scale),
          random_array({d.context_dim, h, w}, rng, -scale, scale),
          random_array({3 * d.motion_dim, h, w}, rng, -scale, scale),
          random_array({d.corr_channels(), h, w}, rng, -scale, scale)};
}

UpdateResult run(const Inputs& in, const WeightStore& w) {
  return update_step(in.hidden, in.st, in.context, in.temporal, in.corr, w);
}

DenseArray naive_conv(const DenseArray& x, const DenseArray& k, const DenseArray& b) {
  const int co = k.dim(0), ci = k.dim(1), ks = k.dim(2), h = x.dim(1), w = x.dim(2);
  DenseArray y({co, h, w});
  for (int o = 0; o < co; ++o)
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        double acc = b[o];
        for (int c = 0; c < ci; ++c)
          for (int a = 0; a < ks; ++a)
            for (int e = 0; e < ks; ++e) {
              const int sy = yy + a - ks / 2, sx = xx + e - ks / 2;
              if (sy >= 0 && sy < h && sx >= 0 && sx < w) acc += k(o, c, a, e) * x(c, sy, sx);
            }
        y(o, yy, xx) = acc;
      }
  return y;
}

DenseArray stack(std::initializer_list<const DenseArray*> parts) {
  int c = 0;
  for (const DenseArray* p : parts) c += p->dim(0);
  const DenseArray& first = **parts.begin();
  DenseArray out({c, first.dim(1), first.dim(2)});
  std::size_t off = 0;
  for (const DenseArray* p : parts)
    for (double v : p->data()) out[off++] = v;
  return out;
}

template <class F>
DenseArray map(DenseArray a, F f) {
  for (double& v : a.data()) v = f(v);
  return a;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

DenseArray head(const DenseArray& x, const WeightStore& w, const std::string& p) {
  const DenseArray y = map(naive_conv(x, w.at(p + ".1.weight"), w.at(p + ".1.bias")),
                           [](double v) { return std::max(v, 0.0); });
  return naive_conv(y, w.at(p + ".2.weight"), w.at(p + ".2.bias"));
}

UpdateResult naive_update(const Inputs& in, const WeightStore& w) {
  const DenseArray x = stack({&in.st, &in.context, &in.temporal, &in.corr});
  const DenseArray hx = stack({&in.hidden, &x});
  const DenseArray z = map(naive_conv(hx, w.at("upd.gru.z.weight"), w.at("upd.gru.z.bias")), sigmoid);
  const DenseArray r = map(naive_conv(hx, w.at("upd.gru.r.weight"), w.at("upd.gru.r.bias")), sigmoid);
  DenseArray rh = in.hidden;
  for (std::size_t i = 0; i < rh.size(); ++i) rh[i] *= r[i];
  const DenseArray rhx = stack({&rh, &x});
  const DenseArray q = map(naive_conv(rhx, w.at("upd.gru.q.weight"), w.at("upd.gru.q.bias")),
                           [](double v) { return std::tanh(v); });
  DenseArray next = in.hidden;
  for (std::size_t i = 0; i < next.size(); ++i) next[i] = (1 - z[i]) * in.hidden[i] + z[i] * q[i];
  return {next, head(next, w, "upd.revision"), map(head(next, w, "upd.confidence"), sigmoid)};
}

}  // namespace

TEST_CASE("zero weights give no revision and even confidence") {
  WeightStore w = update_weights(1, false);
  for (const std::string& n : w.names()) w.at(n).fill(0.0);
  std::mt19937_64 rng(1);
  const Inputs in = random_inputs(5, 6, rng);
  const UpdateResult out = run(in, w);
  CHECK(out.revision.shape() == Shape{2, 5, 6});
  CHECK(out.confidence.shape() == Shape{2, 5, 6});
  CHECK(out.revision.max_abs() == 0.0);
  for (double v : out.confidence.data()) CHECK(v == 0.5);
  // z = 1/2 and the candidate is tanh(0).
  for (std::size_t i = 0; i < in.hidden.size(); ++i) CHECK(out.hidden[i] == 0.5 * in.hidden[i]);
}

TEST_CASE("revision bias passes through zero kernels") {
  WeightStore w = update_weights(2, false);
  for (const std::string& n : w.names()) w.at(n).fill(0.0);
  w.at("upd.revision.2.bias") = DenseArray({2}, {0.3, -0.2});
  std::mt19937_64 rng(2);
  const UpdateResult out = run(random_inputs(4, 4, rng), w);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      CHECK(out.revision(0, y, x) == 0.3);
      CHECK(out.revision(1, y, x) == -0.2);
    }
}

TEST_CASE("update step matches a naive oracle") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const WeightStore w = update_weights(seed);
    std::mt19937_64 rng(seed);
    const Inputs in = random_inputs(4 + static_cast<int>(seed), 5, rng);
    const UpdateResult got = run(in, w), want = naive_update(in, w);
    CHECK(max_abs_diff(got.hidden, want.hidden) < 1e-12);
    CHECK(max_abs_diff(got.revision, want.revision) < 1e-12);
    CHECK(max_abs_diff(got.confidence, want.confidence) < 1e-12);
  }
}

TEST_CASE("confidence stays inside the open unit interval") {
  const WeightStore w = update_weights(3);
  std::mt19937_64 rng(3);
  for (double scale : {0.1, 1.0, 5.0}) {
    const UpdateResult out = run(random_inputs(6, 6, rng, scale), w);
    for (double v : out.confidence.data()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
    CHECK(out.revision.all_finite());
  }
}

TEST_CASE("update step gradients") {
  const WeightStore w = update_weights(4);
  using V = std::vector<ad::Var>;
  static const char* kNames[] = {
      "upd.gru.z.weight",        "upd.gru.z.bias",         "upd.gru.r.weight",
      "upd.gru.r.bias",          "upd.gru.q.weight",       "upd.gru.q.bias",
      "upd.revision.1.weight",   "upd.revision.1.bias",    "upd.revision.2.weight",
      "upd.revision.2.bias",     "upd.confidence.1.weight", "upd.confidence.1.bias",
      "upd.confidence.2.weight", "upd.confidence.2.bias"};
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::mt19937_64 rng(seed);
    const Inputs in = random_inputs(4, 4, rng);
    std::vector<DenseArray> inputs = {in.hidden, in.st, in.context, in.temporal, in.corr};
    for (const char* n : kNames) inputs.push_back(w.at(n));
    const auto f = [](ad::Tape& t, const V& v) {
      UpdateParams p;
      p.gru = {v[5], v[6], v[7], v[8], v[9], v[10]};
      p.revision = {v[11], v[12], v[13], v[14]};
      p.confidence = {v[15], v[16], v[17], v[18]};
      const UpdateVars out = update_step(t, v[0], v[1], v[2], v[3], v[4], p);
      return ad::concat_channels(t, {out.hidden, out.revision, out.confidence});
    };
    CHECK(testutil::gradient_check(f, inputs, seed) < 1e-4);
  }
}

TEST_CASE("update step rejects mismatched rasters") {
  const WeightStore w = update_weights(5);
  std::mt19937_64 rng(5);
  Inputs in = random_inputs(4, 4, rng);
  in.corr = DenseArray({1, 4, 5});
  CHECK_THROWS_AS(run(in, w), Error);
}

TEST_CASE("apply_revision examples") {
  const DenseArray zero({2, 3, 4});
  const DenseArray grid = apply_revision(zero, zero);
  CHECK(grid(0, 2, 3) == 3.0);
  CHECK(grid(1, 2, 3) == 2.0);

  DenseArray flow({2, 3, 4}), rev({2, 3, 4});
  flow(0, 1, 1) = 1.5;
  flow(1, 1, 1) = -0.5;
  rev(0, 1, 1) = 0.25;
  rev(1, 1, 1) = 0.75;
  const DenseArray t = apply_revision(flow, rev);
  CHECK(t(0, 1, 1) == 1.0 + 1.5 + 0.25);
  CHECK(t(1, 1, 1) == 1.0 - 0.5 + 0.75);
  CHECK_THROWS_AS(apply_revision(flow, DenseArray({2, 3, 3})), Error);
  CHECK_THROWS_AS(apply_revision(DenseArray({3, 3, 4}), DenseArray({3, 3, 4})), Error);
}
