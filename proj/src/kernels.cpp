#include "stvo/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace stvo::kernels {

namespace {

// Maps an output tap to an input coordinate; returns -1 when the tap falls in
// zero padding.
inline int source_index(int out, int tap, int stride, int pad, int extent,
                        PadMode mode) {
  int i = out * stride - pad + tap;
  if (i >= 0 && i < extent) return i;
  if (mode == PadMode::kZeros) return -1;
  return std::clamp(i, 0, extent - 1);
}

using Index = std::ptrdiff_t;

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> b,
                    std::span<double> y) {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const int oh = g.out_height(), ow = g.out_width();
  const int taps = g.kernel_h * g.kernel_w;
  const Index depth = static_cast<Index>(g.c_in) * taps;
  // im2col in bands of output rows, then one GEMM per band.
  constexpr Index kColBudget = Index{1} << 22;
  const int band = static_cast<int>(
      std::clamp<Index>(kColBudget / std::max<Index>(depth * ow, 1), 1, std::max(oh, 1)));
  const Eigen::Map<const RowMat> wm(w.data(), g.c_out, depth);
  std::vector<double> col;
  for (int y0 = 0; y0 < oh; y0 += band) {
    const int rows = std::min(band, oh - y0);
    const Index n = static_cast<Index>(rows) * ow;
    col.assign(static_cast<std::size_t>(depth * n), 0.0);
#pragma omp parallel for schedule(static)
    for (Index k = 0; k < depth; ++k) {
      const int ci = static_cast<int>(k / taps);
      const int ky = static_cast<int>(k % taps) / g.kernel_w;
      const int kx = static_cast<int>(k % taps) % g.kernel_w;
      const double* plane = x.data() + static_cast<std::size_t>(ci) * g.height * g.width;
      double* dst = col.data() + k * n;
      for (int r = 0; r < rows; ++r) {
        const int iy = source_index(y0 + r, ky, g.stride, g.pad, g.height, g.pad_mode);
        if (iy < 0) continue;
        const double* row = plane + static_cast<std::size_t>(iy) * g.width;
        for (int ox = 0; ox < ow; ++ox) {
          const int ix = source_index(ox, kx, g.stride, g.pad, g.width, g.pad_mode);
          if (ix >= 0) dst[r * ow + ox] = row[ix];
        }
      }
    }
    const Eigen::Map<const RowMat> cm(col.data(), depth, n);
    Eigen::Map<RowMat, 0, Eigen::OuterStride<>> ym(
        y.data() + static_cast<std::size_t>(y0) * ow, g.c_out, n,
        Eigen::OuterStride<>(static_cast<Index>(oh) * ow));
    ym.noalias() = wm * cm;
    if (!b.empty()) {
      for (int co = 0; co < g.c_out; ++co) ym.row(co).array() += b[co];
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> w,
                           std::span<const double> gy, std::span<double> gx) {
  const int oh = g.out_height(), ow = g.out_width();
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < g.c_in; ++ci) {
    double* plane = gx.data() + static_cast<std::size_t>(ci) * g.height * g.width;
    for (int co = 0; co < g.c_out; ++co) {
      const double* wk =
          w.data() +
          (static_cast<std::size_t>(co) * g.c_in + ci) * g.kernel_h * g.kernel_w;
      const double* grad = gy.data() + static_cast<std::size_t>(co) * oh * ow;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const double go = grad[oy * ow + ox];
          if (go == 0.0) continue;
          for (int ky = 0; ky < g.kernel_h; ++ky) {
            const int iy = source_index(oy, ky, g.stride, g.pad, g.height, g.pad_mode);
            if (iy < 0) continue;
            for (int kx = 0; kx < g.kernel_w; ++kx) {
              const int ix = source_index(ox, kx, g.stride, g.pad, g.width, g.pad_mode);
              if (ix < 0) continue;
              plane[static_cast<std::size_t>(iy) * g.width + ix] +=
                  wk[ky * g.kernel_w + kx] * go;
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> gy, std::span<double> gw,
                            std::span<double> gb) {
  const int oh = g.out_height(), ow = g.out_width();
  const int pairs = g.c_out * g.c_in;
#pragma omp parallel for schedule(static)
  for (int pc = 0; pc < pairs; ++pc) {
    const int co = pc / g.c_in, ci = pc % g.c_in;
    const double* plane =
        x.data() + static_cast<std::size_t>(ci) * g.height * g.width;
    const double* grad = gy.data() + static_cast<std::size_t>(co) * oh * ow;
    double* wk = gw.data() + static_cast<std::size_t>(pc) * g.kernel_h * g.kernel_w;
    for (int ky = 0; ky < g.kernel_h; ++ky) {
      for (int kx = 0; kx < g.kernel_w; ++kx) {
        double acc = 0.0;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = source_index(oy, ky, g.stride, g.pad, g.height, g.pad_mode);
          if (iy < 0) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = source_index(ox, kx, g.stride, g.pad, g.width, g.pad_mode);
            if (ix < 0) continue;
            acc += grad[oy * ow + ox] * plane[static_cast<std::size_t>(iy) * g.width + ix];
          }
        }
        wk[ky * g.kernel_w + kx] += acc;
      }
    }
  }
  if (!gb.empty()) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < g.c_out; ++co) {
      const double* grad = gy.data() + static_cast<std::size_t>(co) * oh * ow;
      double acc = 0.0;
      for (int i = 0; i < oh * ow; ++i) acc += grad[i];
      gb[co] += acc;
    }
  }
}

void correlation(int depth, int h, int w, int hj, int wj,
                 std::span<const double> fi, std::span<const double> fj,
                 double scale, std::span<double> out) {
  const std::size_t plane_i = static_cast<std::size_t>(h) * w;
  const std::size_t plane_j = static_cast<std::size_t>(hj) * wj;
#pragma omp parallel for schedule(static)
  for (Index p = 0; p < static_cast<Index>(plane_i); ++p) {
    double* row = out.data() + static_cast<std::size_t>(p) * plane_j;
    std::fill(row, row + plane_j, 0.0);
    for (int d = 0; d < depth; ++d) {
      const double a = fi[static_cast<std::size_t>(d) * plane_i + p];
      const double* bj = fj.data() + static_cast<std::size_t>(d) * plane_j;
      for (std::size_t q = 0; q < plane_j; ++q) row[q] += a * bj[q];
    }
    for (std::size_t q = 0; q < plane_j; ++q) row[q] *= scale;
  }
}

void avg_pool_trailing(int h, int w, int hl, int wl, std::span<const double> in,
                       std::span<double> out) {
  const int ho = hl / 2, wo = wl / 2;
  const Index pixels = static_cast<Index>(h) * w;
#pragma omp parallel for schedule(static)
  for (Index p = 0; p < pixels; ++p) {
    const double* src = in.data() + static_cast<std::size_t>(p) * hl * wl;
    double* dst = out.data() + static_cast<std::size_t>(p) * ho * wo;
    for (int v = 0; v < ho; ++v) {
      const double* r0 = src + static_cast<std::size_t>(2 * v) * wl;
      const double* r1 = r0 + wl;
      for (int u = 0; u < wo; ++u) {
        dst[v * wo + u] =
            0.25 * (r0[2 * u] + r0[2 * u + 1] + r1[2 * u] + r1[2 * u + 1]);
      }
    }
  }
}

void spatial_mix(int channels, int n, std::span<const double> m,
                 std::span<const double> x, std::span<double> y) {
#pragma omp parallel for schedule(static)
  for (int p = 0; p < n; ++p) {
    const double* row = m.data() + static_cast<std::size_t>(p) * n;
    for (int c = 0; c < channels; ++c) {
      const double* xc = x.data() + static_cast<std::size_t>(c) * n;
      double acc = 0.0;
      for (int q = 0; q < n; ++q) acc += row[q] * xc[q];
      y[static_cast<std::size_t>(c) * n + p] = acc;
    }
  }
}

void matmul_abt(int n, int m, int k, std::span<const double> a,
                std::span<const double> b, std::span<double> c) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const double* ai = a.data() + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < m; ++j) {
      const double* bj = b.data() + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += ai[t] * bj[t];
      c[static_cast<std::size_t>(i) * m + j] = acc;
    }
  }
}

void softmax_rows(int rows, int cols, std::span<const double> in,
                  std::span<double> out) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double* src = in.data() + static_cast<std::size_t>(r) * cols;
    double* dst = out.data() + static_cast<std::size_t>(r) * cols;
    double mx = src[0];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, src[c]);
    double total = 0.0;
    for (int c = 0; c < cols; ++c) {
      dst[c] = std::exp(src[c] - mx);
      total += dst[c];
    }
    const double inv = 1.0 / total;
    for (int c = 0; c < cols; ++c) dst[c] *= inv;
  }
}

namespace reference {

void conv2d_forward(const ConvGeometry& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> b,
                    std::span<double> y) {
  const int oh = g.out_height(), ow = g.out_width();
  for (int co = 0; co < g.c_out; ++co) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = b.empty() ? 0.0 : b[co];
        for (int ci = 0; ci < g.c_in; ++ci) {
          for (int ky = 0; ky < g.kernel_h; ++ky) {
            const int iy = source_index(oy, ky, g.stride, g.pad, g.height, g.pad_mode);
            if (iy < 0) continue;
            for (int kx = 0; kx < g.kernel_w; ++kx) {
              const int ix = source_index(ox, kx, g.stride, g.pad, g.width, g.pad_mode);
              if (ix < 0) continue;
              acc += w[((static_cast<std::size_t>(co) * g.c_in + ci) * g.kernel_h + ky) *
                           g.kernel_w + kx] *
                     x[(static_cast<std::size_t>(ci) * g.height + iy) * g.width + ix];
            }
          }
        }
        y[(static_cast<std::size_t>(co) * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> w,
                           std::span<const double> gy, std::span<double> gx) {
  const int oh = g.out_height(), ow = g.out_width();
  for (int ci = 0; ci < g.c_in; ++ci) {
    for (int co = 0; co < g.c_out; ++co) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const double go = gy[(static_cast<std::size_t>(co) * oh + oy) * ow + ox];
          for (int ky = 0; ky < g.kernel_h; ++ky) {
            const int iy = source_index(oy, ky, g.stride, g.pad, g.height, g.pad_mode);
            if (iy < 0) continue;
            for (int kx = 0; kx < g.kernel_w; ++kx) {
              const int ix = source_index(ox, kx, g.stride, g.pad, g.width, g.pad_mode);
              if (ix < 0) continue;
              gx[(static_cast<std::size_t>(ci) * g.height + iy) * g.width + ix] +=
                  w[((static_cast<std::size_t>(co) * g.c_in + ci) * g.kernel_h + ky) *
                        g.kernel_w + kx] *
                  go;
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> gy, std::span<double> gw,
                            std::span<double> gb) {
  const int oh = g.out_height(), ow = g.out_width();
  for (int co = 0; co < g.c_out; ++co) {
    for (int ci = 0; ci < g.c_in; ++ci) {
      for (int ky = 0; ky < g.kernel_h; ++ky) {
        for (int kx = 0; kx < g.kernel_w; ++kx) {
          double acc = 0.0;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = source_index(oy, ky, g.stride, g.pad, g.height, g.pad_mode);
            if (iy < 0) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = source_index(ox, kx, g.stride, g.pad, g.width, g.pad_mode);
              if (ix < 0) continue;
              acc += gy[(static_cast<std::size_t>(co) * oh + oy) * ow + ox] *
                     x[(static_cast<std::size_t>(ci) * g.height + iy) * g.width + ix];
            }
          }
          gw[((static_cast<std::size_t>(co) * g.c_in + ci) * g.kernel_h + ky) *
                 g.kernel_w + kx] += acc;
        }
      }
    }
    if (!gb.empty()) {
      double acc = 0.0;
      for (int i = 0; i < oh * ow; ++i) acc += gy[static_cast<std::size_t>(co) * oh * ow + i];
      gb[co] += acc;
    }
  }
}

void correlation(int depth, int h, int w, int hj, int wj,
                 std::span<const double> fi, std::span<const double> fj,
                 double scale, std::span<double> out) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int v = 0; v < hj; ++v) {
        for (int u = 0; u < wj; ++u) {
          double acc = 0.0;
          for (int d = 0; d < depth; ++d) {
            acc += fi[(static_cast<std::size_t>(d) * h + y) * w + x] *
                   fj[(static_cast<std::size_t>(d) * hj + v) * wj + u];
          }
          out[((static_cast<std::size_t>(y) * w + x) * hj + v) * wj + u] = acc * scale;
        }
      }
    }
  }
}

void avg_pool_trailing(int h, int w, int hl, int wl, std::span<const double> in,
                       std::span<double> out) {
  const int ho = hl / 2, wo = wl / 2;
  for (int p = 0; p < h * w; ++p) {
    for (int v = 0; v < ho; ++v) {
      for (int u = 0; u < wo; ++u) {
        auto at = [&](int vv, int uu) {
          return in[(static_cast<std::size_t>(p) * hl + vv) * wl + uu];
        };
        out[(static_cast<std::size_t>(p) * ho + v) * wo + u] =
            0.25 * (at(2 * v, 2 * u) + at(2 * v, 2 * u + 1) + at(2 * v + 1, 2 * u) +
                    at(2 * v + 1, 2 * u + 1));
      }
    }
  }
}

void spatial_mix(int channels, int n, std::span<const double> m,
                 std::span<const double> x, std::span<double> y) {
  for (int c = 0; c < channels; ++c) {
    for (int p = 0; p < n; ++p) {
      double acc = 0.0;
      for (int q = 0; q < n; ++q) {
        acc += m[static_cast<std::size_t>(p) * n + q] * x[static_cast<std::size_t>(c) * n + q];
      }
      y[static_cast<std::size_t>(c) * n + p] = acc;
    }
  }
}

void matmul_abt(int n, int m, int k, std::span<const double> a,
                std::span<const double> b, std::span<double> c) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) {
        acc += a[static_cast<std::size_t>(i) * k + t] * b[static_cast<std::size_t>(j) * k + t];
      }
      c[static_cast<std::size_t>(i) * m + j] = acc;
    }
  }
}

void softmax_rows(int rows, int cols, std::span<const double> in,
                  std::span<double> out) {
  for (int r = 0; r < rows; ++r) {
    double mx = in[static_cast<std::size_t>(r) * cols];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, in[static_cast<std::size_t>(r) * cols + c]);
    double total = 0.0;
    for (int c = 0; c < cols; ++c) total += std::exp(in[static_cast<std::size_t>(r) * cols + c] - mx);
    for (int c = 0; c < cols; ++c) {
      out[static_cast<std::size_t>(r) * cols + c] =
          std::exp(in[static_cast<std::size_t>(r) * cols + c] - mx) / total;
    }
  }
}

}  // namespace reference
}  // namespace stvo::kernels
