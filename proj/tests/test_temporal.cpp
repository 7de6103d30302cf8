#include <cmath>
#include <random>

#include "doctest.h"
#include "stvo/error.hpp"
#include "stvo/temporal.hpp"
#include "test_util.hpp"

using namespace stvo;
using testutil::bitwise_equal;
using testutil::max_abs_diff;
using testutil::random_array;

namespace {

NetworkDims small_dims() {
  NetworkDims d;
  d.motion_dim = 3;
  d.motion_feature_dim = 5;
  d.corr_levels = 1;
  d.corr_radius = 1;
  return d;
}

// Zero-padded same convolution, six nested loops.
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

WeightStore encoder_weights(const NetworkDims& dims, std::uint64_t seed) {
  WeightStore w;
  std::mt19937_64 rng(seed);
  add_temporal_encoder_weights(w, dims, rng);
  // Non-zero biases so the oracle exercises them.
  for (const char* name : {"tpm.enc1.bias", "tpm.enc2.bias"})
    w.set(name, random_array(w.at(name).shape(), rng, -0.2, 0.2));
  return w;
}

}  // namespace

TEST_CASE("motion state initialization") {
  const DenseArray a = init_motion_state(42, 3, 4, 6, 8);
  CHECK(a.shape() == Shape{4, 6, 8});
  CHECK(bitwise_equal(a, init_motion_state(42, 3, 4, 6, 8)));
  CHECK_FALSE(bitwise_equal(a, init_motion_state(42, 4, 4, 6, 8)));
  CHECK_FALSE(bitwise_equal(a, init_motion_state(43, 3, 4, 6, 8)));
  CHECK(init_motion_state(42, 3, 4, 6, 8, 0.0).max_abs() == 0.0);

  const DenseArray big = init_motion_state(7, 0, 16, 250, 250);
  REQUIRE(big.size() == 1000000);
  const double n = static_cast<double>(big.size());
  const double mean = big.sum() / n;
  double var = 0.0;
  for (double v : big.data()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (n - 1));
  // Five standard errors of the sample mean and standard deviation.
  CHECK(std::abs(mean) < 5 * 0.1 / std::sqrt(n));
  CHECK(std::abs(sd - 0.1) < 5 * 0.1 / std::sqrt(2 * n));
}

TEST_CASE("warp_motion examples") {
  std::mt19937_64 rng(1);
  const DenseArray m = random_array({3, 5, 6}, rng);
  const ops::WarpResult still = warp_motion(m, DenseArray({2, 5, 6}));
  CHECK(bitwise_equal(still.values, m));
  CHECK(still.mask.sum() == 30.0);

  DenseArray shift({2, 5, 6});
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) shift(0, y, x) = 1.0;
  const ops::WarpResult moved = warp_motion(m, shift);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 5; ++x) CHECK(moved.values(c, y, x) == doctest::Approx(m(c, y, x + 1)).epsilon(1e-14));
      CHECK(moved.values(c, y, 5) == 0.0);
      CHECK(moved.mask(y, 5) == 0.0);
    }
  CHECK(moved.mask.sum() == 25.0);

  DenseArray far({2, 5, 6}, 100.0);
  const ops::WarpResult gone = warp_motion(m, far);
  CHECK(gone.values.max_abs() == 0.0);
  CHECK(gone.mask.sum() == 0.0);

  CHECK_THROWS_AS(warp_motion(m, DenseArray({2, 5, 5})), Error);
}

TEST_CASE("temporal state keeps source, warped, target block order") {
  const DenseArray src({2, 3, 3}, 1.0), warped({2, 3, 3}, 2.0), tgt({2, 3, 3}, 3.0);
  const DenseArray mt = temporal_motion_state(src, warped, tgt);
  CHECK(mt.shape() == Shape{6, 3, 3});
  for (int c = 0; c < 6; ++c) CHECK(mt(c, 1, 2) == 1.0 + c / 2);

  std::mt19937_64 rng(2);
  const DenseArray a = random_array({3, 4, 4}, rng), b = random_array({3, 4, 4}, rng),
                   c = random_array({3, 4, 4}, rng);
  const DenseArray m = temporal_motion_state(a, b, c);
  const std::size_t block = a.size();
  for (std::size_t i = 0; i < block; ++i) {
    CHECK(m[i] == a[i]);
    CHECK(m[block + i] == b[i]);
    CHECK(m[2 * block + i] == c[i]);
  }
  CHECK_THROWS_AS(temporal_motion_state(a, DenseArray({2, 4, 4}), c), Error);
}

TEST_CASE("temporal encoder examples") {
  const NetworkDims dims = small_dims();
  WeightStore w;
  std::mt19937_64 rng(3);
  add_temporal_encoder_weights(w, dims, rng);
  CHECK(w.at("tpm.enc1.weight").shape() == Shape{5, dims.temporal_input_channels(), 3, 3});
  CHECK(w.at("tpm.enc2.weight").shape() == Shape{8, 5, 3, 3});

  // Zero inputs and zero biases: everything is zero.
  const int cc = dims.corr_channels(), h = 4, wd = 5;
  const MotionFeature z = temporal_encode(DenseArray({cc, h, wd}), DenseArray({9, h, wd}),
                                          DenseArray({h, wd}), w, dims.motion_feature_dim);
  CHECK(z.motion_feature.shape() == Shape{5, h, wd});
  CHECK(z.local_state.shape() == Shape{3, h, wd});
  CHECK(z.motion_feature.max_abs() == 0.0);
  CHECK(z.local_state.max_abs() == 0.0);

  // Zero kernels: the outputs are the second-layer biases.
  for (const char* k : {"tpm.enc1.weight", "tpm.enc2.weight"}) w.at(k).fill(0.0);
  w.at("tpm.enc2.bias") = DenseArray({8}, {1, 2, 3, 4, 5, 6, 7, 8});
  const MotionFeature b = temporal_encode(random_array({cc, h, wd}, rng), random_array({9, h, wd}, rng),
                                          DenseArray({h, wd}, 1.0), w, 5);
  CHECK(b.motion_feature(4, 2, 3) == 5.0);
  CHECK(b.local_state(0, 0, 0) == 6.0);
  CHECK(b.local_state(2, 3, 4) == 8.0);

  CHECK_THROWS_AS(temporal_encode(DenseArray({cc, h, wd}), DenseArray({9, h, wd + 1}),
                                  DenseArray({h, wd}), w, 5),
                  Error);
}

TEST_CASE("temporal encoder matches a naive oracle") {
  const NetworkDims dims = small_dims();
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    const WeightStore w = encoder_weights(dims, 10 + trial);
    const int h = 4 + trial, wd = 6;
    const DenseArray corr = random_array({dims.corr_channels(), h, wd}, rng);
    const DenseArray mt = random_array({3 * dims.motion_dim, h, wd}, rng);
    DenseArray mask({h, wd});
    for (double& v : mask.data()) v = (rng() % 4 == 0) ? 0.0 : 1.0;
    const MotionFeature got = temporal_encode(corr, mt, mask, w, dims.motion_feature_dim);

    const DenseArray mask3 = mask.reshaped({1, h, wd});
    const DenseArray x = ops::concat_channels({&corr, &mt, &mask3});
    DenseArray hidden = naive_conv(x, w.at("tpm.enc1.weight"), w.at("tpm.enc1.bias"));
    for (double& v : hidden.data()) v = std::max(v, 0.0);
    const DenseArray out = naive_conv(hidden, w.at("tpm.enc2.weight"), w.at("tpm.enc2.bias"));
    double err = 0.0;
    for (int c = 0; c < 8; ++c)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < wd; ++xx) {
          const double v = c < 5 ? got.motion_feature(c, y, xx) : got.local_state(c - 5, y, xx);
          err = std::max(err, std::abs(v - out(c, y, xx)));
        }
    CHECK(err < 1e-12);
  }
}

TEST_CASE("temporal encoder gradients") {
  const NetworkDims dims = small_dims();
  const WeightStore w = encoder_weights(dims, 5);
  std::mt19937_64 rng(5);
  const int h = 3, wd = 4;
  using V = std::vector<ad::Var>;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const std::vector<DenseArray> inputs = {
        random_array({dims.corr_channels(), h, wd}, rng), random_array({9, h, wd}, rng),
        DenseArray({1, h, wd}, 1.0), w.at("tpm.enc1.weight"), w.at("tpm.enc1.bias"),
        w.at("tpm.enc2.weight"), w.at("tpm.enc2.bias")};
    const auto f = [&](ad::Tape& t, const V& v) {
      const TemporalEncoderParams p{v[3], v[4], v[5], v[6]};
      const MotionFeatureVars out = temporal_encode(t, v[0], v[1], v[2], p, 5);
      return ad::concat_channels(t, {out.motion_feature, out.local_state});
    };
    CHECK(testutil::gradient_check(f, inputs, seed) < 1e-4);
  }
}

TEST_CASE("propagate_back examples") {
  const DenseArray a({2, 2, 2}, 1.0), b({2, 2, 2}, 3.0);
  CHECK(bitwise_equal(propagate_back({&a}), a));
  const DenseArray m = propagate_back({&a, &b});
  for (double v : m.data()) CHECK(v == 2.0);
  try {
    propagate_back({});
    FAIL("expected EmptyTargetSet");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyTargetSet);
  }
  const DenseArray narrow({1, 2, 2});
  CHECK_THROWS_AS(propagate_back({&a, &narrow}), Error);

  std::mt19937_64 rng(6);
  std::vector<DenseArray> states;
  for (int k = 0; k < 5; ++k) states.push_back(random_array({3, 4, 4}, rng));
  std::vector<const DenseArray*> ptrs;
  for (const DenseArray& s : states) ptrs.push_back(&s);
  const DenseArray mean = propagate_back(ptrs);
  for (std::size_t i = 0; i < mean.size(); ++i) {
    long double acc = 0.0L;
    for (const DenseArray& s : states) acc += s[i];
    CHECK(std::abs(mean[i] - static_cast<double>(acc / 5.0L)) < 1e-15);
  }
}
