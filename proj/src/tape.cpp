#include "stvo/tape.hpp"

#include <cmath>

#include "stvo/error.hpp"

namespace stvo::ad {

Var Tape::input(DenseArray value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::param(const DenseArray& value) {
  Node n;
  n.borrowed = &value;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const DenseArray& Tape::value(Var v) const { return nodes_.at(v.id).value(); }

DenseArray Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.empty()) return DenseArray::zeros_like(n.value());
  return n.grad;
}

Var Tape::record(DenseArray value, Vjp vjp) {
  Node n;
  n.owned = std::move(value);
  if (recording_) n.vjp = std::move(vjp);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

void Tape::accumulate(Var v, const DenseArray& delta) {
  if (!v.valid()) return;
  Node& n = nodes_.at(v.id);
  if (n.grad.empty()) {
    require_same_shape(n.value(), delta, "gradient accumulation");
    n.grad = delta;
    return;
  }
  require_same_shape(n.grad, delta, "gradient accumulation");
  for (std::size_t i = 0; i < delta.size(); ++i) n.grad[i] += delta[i];
}

void Tape::backward(Var out, const DenseArray& seed) {
  if (consumed_) throw Error(ErrorCode::kTapeConsumed, "backward called twice");
  if (!recording_) {
    throw Error(ErrorCode::kInvalidArgument, "backward on a non-recording tape");
  }
  consumed_ = true;
  accumulate(out, seed);
  for (std::size_t i = out.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.vjp || n.grad.empty()) continue;
    n.vjp(*this, n.grad);
  }
}

void Tape::backward(Var out) {
  backward(out, DenseArray(value(out).shape(), 1.0));
}

Var conv2d(Tape& t, Var input, Var kernel, Var bias, const ops::Conv2dSpec& spec) {
  static const DenseArray kNoBias;
  const DenseArray& b = bias.valid() ? t.value(bias) : kNoBias;
  DenseArray y = ops::conv2d(t.value(input), t.value(kernel), b, spec);
  return t.record(std::move(y), [=](Tape& tp, const DenseArray& g) {
    auto grads = ops::conv2d_backward(tp.value(input), tp.value(kernel),
                                      bias.valid(), spec, g);
    tp.accumulate(input, grads.input);
    tp.accumulate(kernel, grads.kernel);
    if (bias.valid()) tp.accumulate(bias, grads.bias);
  });
}

Var sigmoid(Tape& t, Var x) {
  DenseArray y = ops::sigmoid(t.value(x));
  const std::size_t self = t.size();
  return t.record(std::move(y), [=](Tape& tp, const DenseArray& g) {
    const DenseArray& s = tp.value(Var{self});
    DenseArray gx = DenseArray::zeros_like(g);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * s[i] * (1.0 - s[i]);
    tp.accumulate(x, gx);
  });
}

Var tanh(Tape& t, Var x) {
  DenseArray y = ops::tanh(t.value(x));
  const std::size_t self = t.size();
  return t.record(std::move(y), [=](Tape& tp, const DenseArray& g) {
    const DenseArray& s = tp.value(Var{self});
    DenseArray gx = DenseArray::zeros_like(g);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * (1.0 - s[i] * s[i]);
    tp.accumulate(x, gx);
  });
}

Var relu(Tape& t, Var x) {
  DenseArray y = ops::relu(t.value(x));
  return t.record(std::move(y), [=](Tape& tp, const DenseArray& g) {
    const DenseArray& in = tp.value(x);
    DenseArray gx = DenseArray::zeros_like(g);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = in[i] > 0.0 ? g[i] : 0.0;
    tp.accumulate(x, gx);
  });
}

Var add(Tape& t, Var a, Var b) {
  DenseArray y = ops::add(t.value(a), t.value(b));
  return t.record(std::move(y), [=](Tape& tp, const DenseArray& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Tape& t, Var a, Var b) {
  DenseArray y = ops::sub(t.value(a), t.value(b));
  return t.record(std::move(y), [=](Tape& tp, const DenseArray& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, ops::scale(g, -1.0));
  });
}

Var mul(Tape& t, Var a, Var b) {
  DenseArray y = ops::mul(t.value(a), t.value(b));
  return t.record(std::move(y), [=](Tape& tp, const DenseArray& g) {
    tp.accumulate(a, ops::mul(g, tp.value(b)));
    tp.accumulate(b, ops::mul(g, tp.value(a)));
  });
}

Var one_minus(Tape& t, Var a) {
  DenseArray y = ops::one_minus(t.value(a));
  return t.record(std::move(y), [=](Tape& tp, const DenseArray& g) {
    tp.accumulate(a, ops::scale(g, -1.0));
  });
}

Var scalar_mul(Tape& t, Var alpha, Var y) {
  require_shape(t.value(alpha), {1}, "scalar_mul alpha");
  const double a = t.value(alpha)[0];
  DenseArray out = ops::scale(t.value(y), a);
  return t.record(std::move(out), [=](Tape& tp, const DenseArray& g) {
    const DenseArray& yv = tp.value(y);
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * yv[i];
    tp.accumulate(alpha, DenseArray({1}, std::vector<double>{dot}));
    tp.accumulate(y, ops::scale(g, tp.value(alpha)[0]));
  });
}

Var concat_channels(Tape& t, const std::vector<Var>& parts) {
  std::vector<const DenseArray*> values;
  std::vector<int> channels;
  for (Var v : parts) {
    values.push_back(&t.value(v));
    channels.push_back(t.value(v).dim(0));
  }
  DenseArray y = ops::concat_channels(values);
  return t.record(std::move(y), [=](Tape& tp, const DenseArray& g) {
    int begin = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      tp.accumulate(parts[i], ops::slice_channels(g, begin, begin + channels[i]));
      begin += channels[i];
    }
  });
}

Var slice_channels(Tape& t, Var a, int begin, int end) {
  DenseArray y = ops::slice_channels(t.value(a), begin, end);
  return t.record(std::move(y), [=](Tape& tp, const DenseArray& g) {
    const DenseArray& src = tp.value(a);
    DenseArray ga = DenseArray::zeros_like(src);
    const std::size_t plane = static_cast<std::size_t>(src.dim(1)) * src.dim(2);
    std::copy(g.data().begin(), g.data().end(), ga.data().begin() + begin * plane);
    tp.accumulate(a, ga);
  });
}

namespace {
DenseArray transpose(const DenseArray& a) {
  if (a.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "transpose2d rank");
  DenseArray out({a.dim(1), a.dim(0)});
  for (int i = 0; i < a.dim(0); ++i)
    for (int j = 0; j < a.dim(1); ++j) out(j, i) = a(i, j);
  return out;
}
}  // namespace

Var transpose2d(Tape& t, Var a) {
  DenseArray y = transpose(t.value(a));
  return t.record(std::move(y), [=](Tape& tp, const DenseArray& g) {
    tp.accumulate(a, transpose(g));
  });
}

Var softmax_rows(Tape& t, Var m) {
  DenseArray y = ops::softmax_rows(t.value(m));
  const std::size_t self = t.size();
  return t.record(std::move(y), [=](Tape& tp, const DenseArray& g) {
    tp.accumulate(m, ops::softmax_rows_backward(tp.value(Var{self}), g));
  });
}

Var spatial_mix(Tape& t, Var m, Var x) {
  DenseArray y = ops::spatial_mix(t.value(m), t.value(x));
  return t.record(std::move(y), [=](Tape& tp, const DenseArray& g) {
    auto grads = ops::spatial_mix_backward(tp.value(m), tp.value(x), g);
    tp.accumulate(m, grads.matrix);
    tp.accumulate(x, grads.input);
  });
}

Var matmul_abt(Tape& t, Var a, Var b) {
  DenseArray y = ops::matmul_abt(t.value(a), t.value(b));
  return t.record(std::move(y), [=](Tape& tp, const DenseArray& g) {
    auto grads = ops::matmul_abt_backward(tp.value(a), tp.value(b), g);
    tp.accumulate(a, grads.a);
    tp.accumulate(b, grads.b);
  });
}

Var sum(Tape& t, Var a) {
  DenseArray y({1}, std::vector<double>{t.value(a).sum()});
  return t.record(std::move(y), [=](Tape& tp, const DenseArray& g) {
    tp.accumulate(a, DenseArray(tp.value(a).shape(), g[0]));
  });
}

WarpVars bilinear_warp(Tape& t, Var field, Var flow) {
  ops::WarpResult r = ops::bilinear_warp(t.value(field), t.value(flow));
  Var out = t.record(std::move(r.values), [=](Tape& tp, const DenseArray& g) {
    auto grads = ops::bilinear_warp_backward(tp.value(field), tp.value(flow), g);
    tp.accumulate(field, grads.field);
    tp.accumulate(flow, grads.flow);
  });
  return {out, std::move(r.mask)};
}

Var gru_cell(Tape& t, Var hidden, Var input, const GruParams& p) {
  const DenseArray& h = t.value(hidden);
  const DenseArray& x = t.value(input);
  if (h.rank() != 3 || x.rank() != 3 || h.dim(1) != x.dim(1) || h.dim(2) != x.dim(2)) {
    throw Error(ErrorCode::kShapeMismatch,
                "gru_cell: hidden " + shape_string(h.shape()) + " vs input " +
                    shape_string(x.shape()));
  }
  const int k = t.value(p.wz).dim(2);
  const auto spec = ops::Conv2dSpec::same(k);
  Var hx = concat_channels(t, {hidden, input});
  Var z = sigmoid(t, conv2d(t, hx, p.wz, p.bz, spec));
  Var r = sigmoid(t, conv2d(t, hx, p.wr, p.br, spec));
  Var rhx = concat_channels(t, {mul(t, r, hidden), input});
  Var q = tanh(t, conv2d(t, rhx, p.wq, p.bq, spec));
  return add(t, mul(t, one_minus(t, z), hidden), mul(t, z, q));
}

}  // namespace stvo::ad
