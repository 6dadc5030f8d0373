#pragma once

#include "cpt/quantize.hpp"
#include "cpt/rng.hpp"
#include "cpt/tensor.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace cpt {

// Handle into a Tape. Only meaningful for the tape that issued it.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Linear reverse-mode tape. Ops append nodes in topological order, so a
// single reverse sweep from the root visits every dependency after all
// of its consumers. The tape is single-use: backward() consumes it, and
// reset() re-arms it for the next step. All execution is deterministic
// and single-threaded; gradient accumulation order is fixed by node
// order.
class Tape {
 public:
  // A leaf holds an external tensor: parameters (requires_grad = true)
  // or input data (requires_grad = false).
  Var leaf(Tensor value, bool requires_grad = false);

  // Appends an op result. `back` receives the node's accumulated
  // upstream gradient; pass an empty function when needs_grad is false.
  Var push(Tensor value, bool needs_grad, std::function<void(Tape&, const Tensor&)> back);

  const Tensor& value(Var v) const;
  bool needs_grad(Var v) const;
  bool has_grad(Var v) const;
  // Valid after backward() for every node the root depends on.
  const Tensor& grad(Var v) const;
  void accumulate_grad(Var v, Tensor g);

  // Runs the reverse sweep from a scalar root. Throws std::logic_error
  // if the tape was already consumed.
  void backward(Var root);
  void reset();

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation
    bool needs_grad = false;
    std::function<void(Tape&, const Tensor&)> back;
  };
  Node& node(Var v);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Ops. Tensors are row-major; images are NCHW.

// a: [M, K], b: [K, N] -> [M, N]
Var matmul(Tape& tp, Var a, Var b);

// x: [N, C, H, W], w: [F, C, kh, kw] -> [N, F, H', W'] with
// H' = (H + 2*padding - kh) / stride + 1 (floor), cross-correlation.
Var conv2d(Tape& tp, Var x, Var w, int stride = 1, int padding = 0);

// x: [N, K] + b: [K], or x: [N, C, H, W] + b: [C] broadcast per channel.
Var add_bias(Tape& tp, Var x, Var b);

// max(x, 0); gradient is 0 at x == 0.
Var relu(Tape& tp, Var x);

// Non-overlapping k x k mean pooling, stride = k, floor output dims.
Var avgpool2d(Tape& tp, Var x, int k);

// [N, d1, ..., dk] -> [N, d1*...*dk]
Var flatten(Tape& tp, Var x);

// logits: [N, C]; labels in [0, C). Returns the scalar mean loss.
// Softmax is computed with per-row max subtraction.
Var softmax_cross_entropy(Tape& tp, Var logits, const std::vector<std::int64_t>& labels);

// Forward: apply_quantizer. Backward: straight-through estimate.
Var fake_quantize(Tape& tp, Var x, const QuantSpec& spec, Rng* rng = nullptr);

// Forward: identity. Backward: the upstream gradient is re-quantized
// with the signed max-scale quantizer and stochastic rounding before
// continuing downstream; this is how reduced backward precision is
// simulated. `rng` must outlive the tape's backward pass. bits == 32
// returns x itself (no node appended).
Var quantize_upstream_grad(Tape& tp, Var x, int bits, Rng& rng);

// SGD with classic momentum; L2 weight decay is folded into the
// gradient before the velocity update:
//   v <- momentum * v + g + weight_decay * p
//   p <- p - lr * v
void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum,
              double weight_decay);

}  // namespace cpt
