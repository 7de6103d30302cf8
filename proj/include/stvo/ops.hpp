#pragma once

// Pure (tape-free) dense-array operations and their vector-Jacobian
// products. The taped versions in tape.hpp call straight into these.

#include <vector>

#include "stvo/kernels.hpp"
#include "stvo/tensor.hpp"

namespace stvo::ops {

struct Conv2dSpec {
  int stride = 1;
  int pad = 0;
  kernels::PadMode pad_mode = kernels::PadMode::kZeros;

  // "same" padding for an odd kernel at stride 1.
  static Conv2dSpec same(int kernel, int stride = 1,
                         kernels::PadMode mode = kernels::PadMode::kZeros) {
    return {stride, kernel / 2, mode};
  }
  static Conv2dSpec valid(int stride = 1) { return {stride, 0, kernels::PadMode::kZeros}; }
};

// input [C_in,H,W], kernel [C_out,C_in,k,k] (k odd), bias [C_out] or empty.
DenseArray conv2d(const DenseArray& input, const DenseArray& kernel,
                  const DenseArray& bias, const Conv2dSpec& spec);

struct Conv2dGrads {
  DenseArray input, kernel, bias;
};
Conv2dGrads conv2d_backward(const DenseArray& input, const DenseArray& kernel,
                            bool has_bias, const Conv2dSpec& spec,
                            const DenseArray& grad_out);

DenseArray sigmoid(const DenseArray& x);
DenseArray tanh(const DenseArray& x);
DenseArray relu(const DenseArray& x);

DenseArray add(const DenseArray& a, const DenseArray& b);
DenseArray sub(const DenseArray& a, const DenseArray& b);
DenseArray mul(const DenseArray& a, const DenseArray& b);
DenseArray scale(const DenseArray& a, double s);
DenseArray one_minus(const DenseArray& a);

// Concatenate rank-3 rasters along the channel axis.
DenseArray concat_channels(const std::vector<const DenseArray*>& parts);
DenseArray slice_channels(const DenseArray& a, int begin, int end);

// Row-wise softmax of a rank-2 array, max-subtracted.
DenseArray softmax_rows(const DenseArray& m);
// Given y = softmax_rows(x) and dL/dy, returns dL/dx.
DenseArray softmax_rows_backward(const DenseArray& y, const DenseArray& grad_out);

struct WarpResult {
  DenseArray values;  // [C,H,W]
  DenseArray mask;    // [H,W], 1 = valid sample, 0 = out of bounds
};
// values[c,p] = bilinear sample of field[c] at p + flow[:,p]; samples outside
// the pixel-center hull [0,W-1]x[0,H-1] are zero with mask 0.
WarpResult bilinear_warp(const DenseArray& field, const DenseArray& flow);

struct WarpGrads {
  DenseArray field, flow;
};
WarpGrads bilinear_warp_backward(const DenseArray& field, const DenseArray& flow,
                                 const DenseArray& grad_out);

// y[c,p] = sum_q m[p,q] x[c,q] with x [C,H,W] and m [HW,HW].
DenseArray spatial_mix(const DenseArray& m, const DenseArray& x);
struct SpatialMixGrads {
  DenseArray matrix, input;
};
SpatialMixGrads spatial_mix_backward(const DenseArray& m, const DenseArray& x,
                                     const DenseArray& grad_out);

// a [N,K], b [M,K] -> a * b^T [N,M]
DenseArray matmul_abt(const DenseArray& a, const DenseArray& b);
struct MatmulGrads {
  DenseArray a, b;
};
MatmulGrads matmul_abt_backward(const DenseArray& a, const DenseArray& b,
                                const DenseArray& grad_out);

}  // namespace stvo::ops
