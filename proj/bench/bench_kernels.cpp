// Serial reference loops against the OpenMP kernels at pipeline sizes
// (1/8 of a 512x384 input: 48x64 = 3072 pixels).
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "stvo/kernels.hpp"

namespace k = stvo::kernels;

namespace {

constexpr int kH = 48, kW = 64, kN = kH * kW;

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

k::ConvGeometry gru_conv() {
  // 3x3 conv over a GRU input stack.
  return {256, kH, kW, 128, 3, 3, 1, 1, k::PadMode::kZeros};
}

template <bool Parallel>
void BM_Conv2dForward(benchmark::State& state) {
  const k::ConvGeometry g = gru_conv();
  const auto x = random_vector(std::size_t(g.c_in) * kN, 1);
  const auto w = random_vector(std::size_t(g.c_out) * g.c_in * 9, 2);
  const auto b = random_vector(g.c_out, 3);
  std::vector<double> y(std::size_t(g.c_out) * kN);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv2d_forward(g, x, w, b, y);
    } else {
      k::reference::conv2d_forward(g, x, w, b, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(g.c_out) * g.c_in * 9 * kN);
}

template <bool Parallel>
void BM_Conv2dBackwardWeight(benchmark::State& state) {
  const k::ConvGeometry g = gru_conv();
  const auto x = random_vector(std::size_t(g.c_in) * kN, 1);
  const auto gy = random_vector(std::size_t(g.c_out) * kN, 2);
  std::vector<double> gw(std::size_t(g.c_out) * g.c_in * 9), gb(g.c_out);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv2d_backward_weight(g, x, gy, gw, gb);
    } else {
      k::reference::conv2d_backward_weight(g, x, gy, gw, gb);
    }
    benchmark::DoNotOptimize(gw.data());
  }
}

template <bool Parallel>
void BM_Correlation(benchmark::State& state) {
  const int d = 128;
  const auto fi = random_vector(std::size_t(d) * kN, 1), fj = random_vector(std::size_t(d) * kN, 2);
  std::vector<double> out(std::size_t(kN) * kN);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::correlation(d, kH, kW, kH, kW, fi, fj, 1.0, out);
    } else {
      k::reference::correlation(d, kH, kW, kH, kW, fi, fj, 1.0, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_SpatialMix(benchmark::State& state) {
  const int c = 128;
  const auto m = random_vector(std::size_t(kN) * kN, 1), x = random_vector(std::size_t(c) * kN, 2);
  std::vector<double> y(std::size_t(c) * kN);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::spatial_mix(c, kN, m, x, y);
    } else {
      k::reference::spatial_mix(c, kN, m, x, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_SoftmaxRows(benchmark::State& state) {
  const auto in = random_vector(std::size_t(kN) * kN, 1);
  std::vector<double> out(in.size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::softmax_rows(kN, kN, in, out);
    } else {
      k::reference::softmax_rows(kN, kN, in, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_AvgPool(benchmark::State& state) {
  const auto in = random_vector(std::size_t(kN) * kN, 1);
  std::vector<double> out(std::size_t(kN) * (kH / 2) * (kW / 2));
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::avg_pool_trailing(kH, kW, kH, kW, in, out);
    } else {
      k::reference::avg_pool_trailing(kH, kW, kH, kW, in, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

#define STVO_BENCH_PAIR(fn)                                                  \
  BENCHMARK(fn<false>)->Name(#fn "/serial")->Unit(benchmark::kMillisecond)->UseRealTime(); \
  BENCHMARK(fn<true>)->Name(#fn "/openmp")->Unit(benchmark::kMillisecond)->UseRealTime()

STVO_BENCH_PAIR(BM_Conv2dForward);
STVO_BENCH_PAIR(BM_Conv2dBackwardWeight);
STVO_BENCH_PAIR(BM_Correlation);
STVO_BENCH_PAIR(BM_SpatialMix);
STVO_BENCH_PAIR(BM_SoftmaxRows);
STVO_BENCH_PAIR(BM_AvgPool);

BENCHMARK_MAIN();
