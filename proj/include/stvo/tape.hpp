#pragma once

// Reverse-mode differentiation over DenseArray operations.
//
// A Tape owns every intermediate value produced through it. Each op appends
// one node; backward() walks the nodes in exact reverse creation order and
// calls the recorded vector-Jacobian product. With recording disabled the
// same module code runs as a plain forward pass (no closures kept).

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "stvo/ops.hpp"
#include "stvo/tensor.hpp"

namespace stvo::ad {

struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const noexcept { return id != kNone; }
};

class Tape {
 public:
  using Vjp = std::function<void(Tape&, const DenseArray& grad_out)>;

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }

  // Leaf owning its value.
  Var input(DenseArray value);
  // Leaf borrowing `value`, which must outlive the tape (weights).
  Var param(const DenseArray& value);

  const DenseArray& value(Var v) const;
  // Gradient accumulated for `v` by backward(); zeros if nothing reached it.
  DenseArray grad(Var v) const;

  // Seeds dL/d(out) and propagates. A tape can be consumed once.
  void backward(Var out, const DenseArray& seed);
  // Seeds with ones (loss = sum of out).
  void backward(Var out);

  // Op plumbing.
  Var record(DenseArray value, Vjp vjp);
  void accumulate(Var v, const DenseArray& delta);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    DenseArray owned;
    const DenseArray* borrowed = nullptr;
    DenseArray grad;
    Vjp vjp;
    const DenseArray& value() const { return borrowed ? *borrowed : owned; }
  };

  std::vector<Node> nodes_;
  bool recording_;
  bool consumed_ = false;
};

Var conv2d(Tape& t, Var input, Var kernel, Var bias, const ops::Conv2dSpec& spec);
Var sigmoid(Tape& t, Var x);
Var tanh(Tape& t, Var x);
Var relu(Tape& t, Var x);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var one_minus(Tape& t, Var a);
// alpha has shape [1]; returns alpha * y.
Var scalar_mul(Tape& t, Var alpha, Var y);
Var concat_channels(Tape& t, const std::vector<Var>& parts);
Var slice_channels(Tape& t, Var a, int begin, int end);
Var transpose2d(Tape& t, Var a);
Var softmax_rows(Tape& t, Var m);
Var spatial_mix(Tape& t, Var m, Var x);
Var matmul_abt(Tape& t, Var a, Var b);
// Sum of all entries, shape [1].
Var sum(Tape& t, Var a);

struct WarpVars {
  Var values;
  DenseArray mask;  // not differentiable
};
WarpVars bilinear_warp(Tape& t, Var field, Var flow);

// Convolutional GRU built from the ops above.
//   z  = sigmoid(conv([h, x]; Wz) + bz)
//   r  = sigmoid(conv([h, x]; Wr) + br)
//   h~ = tanh(conv([r*h, x]; Wq) + bq)
//   h' = (1 - z) * h + z * h~
struct GruParams {
  Var wz, bz, wr, br, wq, bq;
};
Var gru_cell(Tape& t, Var hidden, Var input, const GruParams& p);

}  // namespace stvo::ad
