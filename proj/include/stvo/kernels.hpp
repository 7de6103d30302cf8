#pragma once

// Data-parallel inner loops. Every kernel in `stvo::kernels` is OpenMP
// parallel over independent outputs only (no cross-thread floating-point
// reductions), so results do not depend on the thread count. The matching
// `stvo::kernels::reference` functions are the plain serial loops; tests hold
// the two to 1e-12 and bench/ compares their throughput.

#include <span>

namespace stvo::kernels {

enum class PadMode { kZeros, kReplicate };

struct ConvGeometry {
  int c_in = 0, height = 0, width = 0;
  int c_out = 0, kernel_h = 1, kernel_w = 1;
  int stride = 1, pad = 0;
  PadMode pad_mode = PadMode::kZeros;

  int out_height() const { return (height + 2 * pad - kernel_h) / stride + 1; }
  int out_width() const { return (width + 2 * pad - kernel_w) / stride + 1; }
};

// x: [c_in,H,W], w: [c_out,c_in,kh,kw], b: [c_out] (may be empty),
// y: [c_out,H',W'] (overwritten).
void conv2d_forward(const ConvGeometry& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> b,
                    std::span<double> y);
// gx += dL/dx
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> w,
                           std::span<const double> gy, std::span<double> gx);
// gw += dL/dw, gb += dL/db (gb may be empty)
void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> gy, std::span<double> gw,
                            std::span<double> gb);

// out[y,x,v,u] = scale * <fi[:,y,x], fj[:,v,u]>; fi: [D,H,W], fj: [D,Hj,Wj].
void correlation(int depth, int h, int w, int hj, int wj,
                 std::span<const double> fi, std::span<const double> fj,
                 double scale, std::span<double> out);

// 2x2 average pool over the two trailing (target) axes of [H,W,Hl,Wl];
// odd trailing sizes drop the last row/column.
void avg_pool_trailing(int h, int w, int hl, int wl, std::span<const double> in,
                       std::span<double> out);

// y[c,p] = sum_q m[p,q] * x[c,q]; m: [N,N], x/y: [C,N].
void spatial_mix(int channels, int n, std::span<const double> m,
                 std::span<const double> x, std::span<double> y);

// c[i,j] = sum_k a[i,k] * b[j,k]; a: [N,K], b: [M,K], c: [N,M].
void matmul_abt(int n, int m, int k, std::span<const double> a,
                std::span<const double> b, std::span<double> c);

// Row-wise max-subtracted softmax of [rows, cols].
void softmax_rows(int rows, int cols, std::span<const double> in,
                  std::span<double> out);

namespace reference {

void conv2d_forward(const ConvGeometry& g, std::span<const double> x,
                    std::span<const double> w, std::span<const double> b,
                    std::span<double> y);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> w,
                           std::span<const double> gy, std::span<double> gx);
void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> gy, std::span<double> gw,
                            std::span<double> gb);
void correlation(int depth, int h, int w, int hj, int wj,
                 std::span<const double> fi, std::span<const double> fj,
                 double scale, std::span<double> out);
void avg_pool_trailing(int h, int w, int hl, int wl, std::span<const double> in,
                       std::span<double> out);
void spatial_mix(int channels, int n, std::span<const double> m,
                 std::span<const double> x, std::span<double> y);
void matmul_abt(int n, int m, int k, std::span<const double> a,
                std::span<const double> b, std::span<double> c);
void softmax_rows(int rows, int cols, std::span<const double> in,
                  std::span<double> out);

}  // namespace reference
}  // namespace stvo::kernels
