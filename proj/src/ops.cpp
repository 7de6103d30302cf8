#include "stvo/ops.hpp"

#include <algorithm>
#include <cmath>

#include "stvo/error.hpp"

namespace stvo::ops {

namespace {

kernels::ConvGeometry geometry(const DenseArray& input, const DenseArray& kernel,
                               const Conv2dSpec& spec) {
  if (input.rank() != 3 || kernel.rank() != 4) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d expects input [C,H,W] and kernel [O,C,k,k]");
  }
  if (kernel.dim(1) != input.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d channel disagreement: input " + shape_string(input.shape()) +
                    ", kernel " + shape_string(kernel.shape()));
  }
  if (kernel.dim(2) % 2 == 0 || kernel.dim(3) % 2 == 0) {
    throw Error(ErrorCode::kShapeMismatch, "conv2d kernel size must be odd");
  }
  if (spec.stride < 1 || spec.pad < 0) {
    throw Error(ErrorCode::kInvalidArgument, "conv2d stride/padding");
  }
  kernels::ConvGeometry g;
  g.c_in = input.dim(0);
  g.height = input.dim(1);
  g.width = input.dim(2);
  g.c_out = kernel.dim(0);
  g.kernel_h = kernel.dim(2);
  g.kernel_w = kernel.dim(3);
  g.stride = spec.stride;
  g.pad = spec.pad;
  g.pad_mode = spec.pad_mode;
  if (g.out_height() < 1 || g.out_width() < 1) {
    throw Error(ErrorCode::kShapeMismatch, "conv2d output would be empty");
  }
  return g;
}

template <typename F>
DenseArray map(const DenseArray& x, F f) {
  DenseArray y = DenseArray::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return y;
}

template <typename F>
DenseArray zip(const DenseArray& a, const DenseArray& b, F f, const char* ctx) {
  require_same_shape(a, b, ctx);
  DenseArray y = DenseArray::zeros_like(a);
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = f(a[i], b[i]);
  return y;
}

struct Bilinear {
  int x0, y0;
  double tx, ty;
  bool valid;
};

// Sample point (sx, sy) inside the closed pixel-center hull; corner indices
// are pulled in at the far edge so the upper corner never leaves the raster.
Bilinear locate(double sx, double sy, int h, int w) {
  Bilinear b{0, 0, 0.0, 0.0, false};
  if (!(sx >= 0.0 && sx <= w - 1 && sy >= 0.0 && sy <= h - 1)) return b;
  b.x0 = std::min(static_cast<int>(std::floor(sx)), std::max(w - 2, 0));
  b.y0 = std::min(static_cast<int>(std::floor(sy)), std::max(h - 2, 0));
  b.tx = sx - b.x0;
  b.ty = sy - b.y0;
  b.valid = true;
  return b;
}

}  // namespace

DenseArray conv2d(const DenseArray& input, const DenseArray& kernel,
                  const DenseArray& bias, const Conv2dSpec& spec) {
  const auto g = geometry(input, kernel, spec);
  if (!bias.empty()) require_shape(bias, {g.c_out}, "conv2d bias");
  DenseArray out({g.c_out, g.out_height(), g.out_width()});
  kernels::conv2d_forward(g, input.data(), kernel.data(), bias.data(), out.data());
  check_finite(out, "conv2d");
  return out;
}

Conv2dGrads conv2d_backward(const DenseArray& input, const DenseArray& kernel,
                            bool has_bias, const Conv2dSpec& spec,
                            const DenseArray& grad_out) {
  const auto g = geometry(input, kernel, spec);
  require_shape(grad_out, {g.c_out, g.out_height(), g.out_width()},
                "conv2d grad_out");
  Conv2dGrads grads{DenseArray::zeros_like(input), DenseArray::zeros_like(kernel),
                    has_bias ? DenseArray({g.c_out}) : DenseArray()};
  kernels::conv2d_backward_input(g, kernel.data(), grad_out.data(),
                                 grads.input.data());
  kernels::conv2d_backward_weight(g, input.data(), grad_out.data(),
                                  grads.kernel.data(), grads.bias.data());
  return grads;
}

DenseArray sigmoid(const DenseArray& x) {
  return map(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

DenseArray tanh(const DenseArray& x) {
  return map(x, [](double v) { return std::tanh(v); });
}

DenseArray relu(const DenseArray& x) {
  return map(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

DenseArray add(const DenseArray& a, const DenseArray& b) {
  return zip(a, b, [](double u, double v) { return u + v; }, "add");
}

DenseArray sub(const DenseArray& a, const DenseArray& b) {
  return zip(a, b, [](double u, double v) { return u - v; }, "sub");
}

DenseArray mul(const DenseArray& a, const DenseArray& b) {
  return zip(a, b, [](double u, double v) { return u * v; }, "mul");
}

DenseArray scale(const DenseArray& a, double s) {
  return map(a, [s](double v) { return v * s; });
}

DenseArray one_minus(const DenseArray& a) {
  return map(a, [](double v) { return 1.0 - v; });
}

DenseArray concat_channels(const std::vector<const DenseArray*>& parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "concat of nothing");
  const int h = parts.front()->dim(1), w = parts.front()->dim(2);
  int channels = 0;
  for (const DenseArray* p : parts) {
    if (p->rank() != 3 || p->dim(1) != h || p->dim(2) != w) {
      throw Error(ErrorCode::kShapeMismatch,
                  "concat_channels spatial mismatch: " + shape_string(p->shape()));
    }
    channels += p->dim(0);
  }
  DenseArray out({channels, h, w});
  std::size_t offset = 0;
  for (const DenseArray* p : parts) {
    std::copy(p->data().begin(), p->data().end(), out.data().begin() + offset);
    offset += p->size();
  }
  return out;
}

DenseArray slice_channels(const DenseArray& a, int begin, int end) {
  if (a.rank() != 3 || begin < 0 || end > a.dim(0) || begin >= end) {
    throw Error(ErrorCode::kShapeMismatch, "slice_channels range");
  }
  const std::size_t plane = static_cast<std::size_t>(a.dim(1)) * a.dim(2);
  DenseArray out({end - begin, a.dim(1), a.dim(2)});
  std::copy(a.data().begin() + begin * plane, a.data().begin() + end * plane,
            out.data().begin());
  return out;
}

DenseArray softmax_rows(const DenseArray& m) {
  if (m.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "softmax_rows expects [N,M]");
  DenseArray out = DenseArray::zeros_like(m);
  kernels::softmax_rows(m.dim(0), m.dim(1), m.data(), out.data());
  check_finite(out, "softmax_rows");
  return out;
}

DenseArray softmax_rows_backward(const DenseArray& y, const DenseArray& grad_out) {
  require_same_shape(y, grad_out, "softmax_rows_backward");
  const int rows = y.dim(0), cols = y.dim(1);
  DenseArray gx = DenseArray::zeros_like(y);
  for (int r = 0; r < rows; ++r) {
    double dot = 0.0;
    for (int c = 0; c < cols; ++c) dot += y(r, c) * grad_out(r, c);
    for (int c = 0; c < cols; ++c) gx(r, c) = y(r, c) * (grad_out(r, c) - dot);
  }
  return gx;
}

WarpResult bilinear_warp(const DenseArray& field, const DenseArray& flow) {
  if (field.rank() != 3) throw Error(ErrorCode::kShapeMismatch, "warp field rank");
  const int c = field.dim(0), h = field.dim(1), w = field.dim(2);
  require_shape(flow, {2, h, w}, "bilinear_warp flow");
  WarpResult r{DenseArray({c, h, w}), DenseArray({h, w})};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Bilinear b = locate(x + flow(0, y, x), y + flow(1, y, x), h, w);
      if (!b.valid) continue;
      r.mask(y, x) = 1.0;
      const int x1 = std::min(b.x0 + 1, w - 1), y1 = std::min(b.y0 + 1, h - 1);
      const double w00 = (1 - b.tx) * (1 - b.ty), w01 = b.tx * (1 - b.ty);
      const double w10 = (1 - b.tx) * b.ty, w11 = b.tx * b.ty;
      for (int ch = 0; ch < c; ++ch) {
        r.values(ch, y, x) = w00 * field(ch, b.y0, b.x0) + w01 * field(ch, b.y0, x1) +
                             w10 * field(ch, y1, b.x0) + w11 * field(ch, y1, x1);
      }
    }
  }
  return r;
}

WarpGrads bilinear_warp_backward(const DenseArray& field, const DenseArray& flow,
                                 const DenseArray& grad_out) {
  require_same_shape(field, grad_out, "bilinear_warp_backward");
  const int c = field.dim(0), h = field.dim(1), w = field.dim(2);
  WarpGrads g{DenseArray::zeros_like(field), DenseArray::zeros_like(flow)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Bilinear b = locate(x + flow(0, y, x), y + flow(1, y, x), h, w);
      if (!b.valid) continue;
      const int x1 = std::min(b.x0 + 1, w - 1), y1 = std::min(b.y0 + 1, h - 1);
      const double w00 = (1 - b.tx) * (1 - b.ty), w01 = b.tx * (1 - b.ty);
      const double w10 = (1 - b.tx) * b.ty, w11 = b.tx * b.ty;
      double gfx = 0.0, gfy = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        const double go = grad_out(ch, y, x);
        if (go == 0.0) continue;
        const double f00 = field(ch, b.y0, b.x0), f01 = field(ch, b.y0, x1);
        const double f10 = field(ch, y1, b.x0), f11 = field(ch, y1, x1);
        g.field(ch, b.y0, b.x0) += w00 * go;
        g.field(ch, b.y0, x1) += w01 * go;
        g.field(ch, y1, b.x0) += w10 * go;
        g.field(ch, y1, x1) += w11 * go;
        gfx += go * ((1 - b.ty) * (f01 - f00) + b.ty * (f11 - f10));
        gfy += go * ((1 - b.tx) * (f10 - f00) + b.tx * (f11 - f01));
      }
      g.flow(0, y, x) = gfx;
      g.flow(1, y, x) = gfy;
    }
  }
  return g;
}

DenseArray spatial_mix(const DenseArray& m, const DenseArray& x) {
  if (x.rank() != 3) throw Error(ErrorCode::kShapeMismatch, "spatial_mix input rank");
  const int n = x.dim(1) * x.dim(2);
  require_shape(m, {n, n}, "spatial_mix matrix");
  DenseArray y = DenseArray::zeros_like(x);
  kernels::spatial_mix(x.dim(0), n, m.data(), x.data(), y.data());
  check_finite(y, "spatial_mix");
  return y;
}

SpatialMixGrads spatial_mix_backward(const DenseArray& m, const DenseArray& x,
                                     const DenseArray& grad_out) {
  require_same_shape(x, grad_out, "spatial_mix_backward");
  const int c = x.dim(0), n = x.dim(1) * x.dim(2);
  SpatialMixGrads g{DenseArray::zeros_like(m), DenseArray::zeros_like(x)};
  // dM[p,q] = sum_c gy[c,p] x[c,q]
  const DenseArray gy_t = grad_out.reshaped({c, n});
  const DenseArray x_t = x.reshaped({c, n});
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) {
      double acc = 0.0;
      for (int ch = 0; ch < c; ++ch) acc += gy_t(ch, p) * x_t(ch, q);
      g.matrix(p, q) = acc;
    }
  }
  // dx[c,q] = sum_p gy[c,p] m[p,q]
  for (int ch = 0; ch < c; ++ch) {
    for (int p = 0; p < n; ++p) {
      const double go = gy_t(ch, p);
      if (go == 0.0) continue;
      for (int q = 0; q < n; ++q) g.input[static_cast<std::size_t>(ch) * n + q] += go * m(p, q);
    }
  }
  return g;
}

DenseArray matmul_abt(const DenseArray& a, const DenseArray& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw Error(ErrorCode::kShapeMismatch, "matmul_abt: " + shape_string(a.shape()) +
                                               " x " + shape_string(b.shape()) + "^T");
  }
  DenseArray c({a.dim(0), b.dim(0)});
  kernels::matmul_abt(a.dim(0), b.dim(0), a.dim(1), a.data(), b.data(), c.data());
  check_finite(c, "matmul_abt");
  return c;
}

MatmulGrads matmul_abt_backward(const DenseArray& a, const DenseArray& b,
                                const DenseArray& grad_out) {
  const int n = a.dim(0), m = b.dim(0), k = a.dim(1);
  require_shape(grad_out, {n, m}, "matmul_abt_backward");
  MatmulGrads g{DenseArray::zeros_like(a), DenseArray::zeros_like(b)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double go = grad_out(i, j);
      if (go == 0.0) continue;
      for (int t = 0; t < k; ++t) {
        g.a(i, t) += go * b(j, t);
        g.b(j, t) += go * a(i, t);
      }
    }
  }
  return g;
}

}  // namespace stvo::ops
