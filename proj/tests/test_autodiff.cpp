#include "cpt/autodiff.hpp"

#include "cpt/rng.hpp"
#include "cpt/tensor.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

using namespace cpt;

namespace {

Tensor random_tensor(std::vector<std::int64_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values()) v = rng.normal(0.0, scale);
  return t;
}

// Central finite difference of a scalar-valued builder with respect to
// every element of `inputs[which]`. The builder reconstructs the graph
// from scratch each evaluation, so quantizer scales and relu masks are
// recomputed consistently.
using ScalarFn = std::function<double(const std::vector<Tensor>&)>;

void check_grad_fd(const std::vector<Tensor>& inputs, std::size_t which, const ScalarFn& eval,
                   const Tensor& analytic, double h = 1e-5, double tol = 1e-4) {
  REQUIRE(analytic.same_shape(inputs[which]));
  for (std::int64_t i = 0; i < inputs[which].size(); ++i) {
    std::vector<Tensor> plus = inputs;
    std::vector<Tensor> minus = inputs;
    plus[which][i] += h;
    minus[which][i] -= h;
    const double fd = (eval(plus) - eval(minus)) / (2 * h);
    const double an = analytic[i];
    const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
    CAPTURE(which);
    CAPTURE(i);
    CAPTURE(fd);
    CAPTURE(an);
    CHECK(rel < tol);
  }
}

// Sum-of-elements head: turns any op output into a scalar with gradient
// all-ones, exercising the op's backward exactly.
Var sum_all(Tape& tp, Var x) {
  const Tensor& v = tp.value(x);
  double total = 0.0;
  for (std::int64_t i = 0; i < v.size(); ++i) total += v[i] * (0.5 + 0.25 * (i % 3));
  Tensor weights(v.shape());
  for (std::int64_t i = 0; i < weights.size(); ++i) weights[i] = 0.5 + 0.25 * (i % 3);
  return tp.push(Tensor::scalar(total), tp.needs_grad(x),
                 [x, weights](Tape& t, const Tensor& up) {
                   Tensor g(weights.shape());
                   for (std::int64_t i = 0; i < g.size(); ++i) g[i] = up[0] * weights[i];
                   t.accumulate_grad(x, std::move(g));
                 });
}

// Builds the graph, runs backward, returns the leaf gradients.
template <typename Build>
std::vector<Tensor> leaf_grads(const std::vector<Tensor>& inputs,
                               const std::vector<bool>& needs, Build build) {
  Tape tp;
  std::vector<Var> leaves;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    leaves.push_back(tp.leaf(inputs[i], needs[i]));
  const Var root = build(tp, leaves);
  tp.backward(root);
  std::vector<Tensor> grads;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    grads.push_back(needs[i] ? tp.grad(leaves[i]) : Tensor::zeros({1}));
  return grads;
}

template <typename Build>
ScalarFn scalar_fn(Build build) {
  return [build](const std::vector<Tensor>& inputs) {
    Tape tp;
    std::vector<Var> leaves;
    for (const Tensor& t : inputs) leaves.push_back(tp.leaf(t, false));
    return tp.value(build(tp, leaves))[0];
  };
}

}  // namespace

TEST_CASE("matmul gradients match finite differences") {
  Rng rng(21);
  const std::vector<Tensor> inputs = {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng)};
  auto build = [](Tape& tp, const std::vector<Var>& v) {
    return sum_all(tp, matmul(tp, v[0], v[1]));
  };
  const auto grads = leaf_grads(inputs, {true, true}, build);
  check_grad_fd(inputs, 0, scalar_fn(build), grads[0]);
  check_grad_fd(inputs, 1, scalar_fn(build), grads[1]);
}

TEST_CASE("matmul respects needs_grad") {
  Rng rng(22);
  Tape tp;
  const Var a = tp.leaf(random_tensor({2, 3}, rng), false);
  const Var b = tp.leaf(random_tensor({3, 2}, rng), true);
  const Var m = matmul(tp, a, b);
  tp.backward(sum_all(tp, m));
  CHECK(!tp.has_grad(a));
  CHECK(tp.has_grad(b));
}

TEST_CASE("conv2d gradients match finite differences (stride and padding variants)") {
  Rng rng(23);
  struct Case {
    int stride, pad;
  };
  for (const Case c : {Case{1, 0}, Case{1, 1}, Case{2, 0}, Case{2, 1}}) {
    CAPTURE(c.stride);
    CAPTURE(c.pad);
    const std::vector<Tensor> inputs = {random_tensor({2, 2, 5, 5}, rng),
                                        random_tensor({3, 2, 3, 3}, rng)};
    auto build = [c](Tape& tp, const std::vector<Var>& v) {
      return sum_all(tp, conv2d(tp, v[0], v[1], c.stride, c.pad));
    };
    const auto grads = leaf_grads(inputs, {true, true}, build);
    check_grad_fd(inputs, 0, scalar_fn(build), grads[0]);
    check_grad_fd(inputs, 1, scalar_fn(build), grads[1]);
  }
}

TEST_CASE("conv2d forward matches a hand-computed cross-correlation") {
  Tape tp;
  // 1x1x3x3 input, 1x1x2x2 kernel, stride 1, no padding.
  const Var x = tp.leaf(Tensor::from_data({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}), false);
  const Var w = tp.leaf(Tensor::from_data({1, 1, 2, 2}, {1, 0, 0, -1}), false);
  const Tensor& y = tp.value(conv2d(tp, x, w));
  REQUIRE(y.shape() == std::vector<std::int64_t>{1, 1, 2, 2});
  CHECK(y[0] == 1 - 5);
  CHECK(y[1] == 2 - 6);
  CHECK(y[2] == 4 - 8);
  CHECK(y[3] == 5 - 9);
}

TEST_CASE("add_bias gradients: matrix plus per-column bias") {
  Rng rng(24);
  const std::vector<Tensor> inputs = {random_tensor({4, 3}, rng), random_tensor({3}, rng)};
  auto build = [](Tape& tp, const std::vector<Var>& v) {
    return sum_all(tp, add_bias(tp, v[0], v[1]));
  };
  const auto grads = leaf_grads(inputs, {true, true}, build);
  check_grad_fd(inputs, 0, scalar_fn(build), grads[0]);
  check_grad_fd(inputs, 1, scalar_fn(build), grads[1]);
}

TEST_CASE("add_bias gradients: NCHW plus per-channel bias") {
  Rng rng(25);
  const std::vector<Tensor> inputs = {random_tensor({2, 3, 2, 2}, rng), random_tensor({3}, rng)};
  auto build = [](Tape& tp, const std::vector<Var>& v) {
    return sum_all(tp, add_bias(tp, v[0], v[1]));
  };
  const auto grads = leaf_grads(inputs, {true, true}, build);
  check_grad_fd(inputs, 0, scalar_fn(build), grads[0]);
  check_grad_fd(inputs, 1, scalar_fn(build), grads[1]);
}

TEST_CASE("relu gradient matches finite differences away from the kink") {
  Rng rng(26);
  Tensor x = random_tensor({37}, rng);
  for (double& v : x.values())
    if (std::abs(v) < 1e-3) v = 0.1;  // keep FD away from the non-differentiable point
  const std::vector<Tensor> inputs = {x};
  auto build = [](Tape& tp, const std::vector<Var>& v) { return sum_all(tp, relu(tp, v[0])); };
  const auto grads = leaf_grads(inputs, {true}, build);
  check_grad_fd(inputs, 0, scalar_fn(build), grads[0]);
}

TEST_CASE("relu at exactly zero has zero gradient") {
  Tape tp;
  const Var x = tp.leaf(Tensor::from_data({3}, {-1.0, 0.0, 2.0}), true);
  tp.backward(sum_all(tp, relu(tp, x)));
  const Tensor& g = tp.grad(x);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] != 0.0);
}

TEST_CASE("avgpool2d gradients match finite differences") {
  Rng rng(27);
  // 5x6 input with k=2: odd tail row is dropped by floor division.
  const std::vector<Tensor> inputs = {random_tensor({2, 2, 5, 6}, rng)};
  auto build = [](Tape& tp, const std::vector<Var>& v) {
    return sum_all(tp, avgpool2d(tp, v[0], 2));
  };
  const auto grads = leaf_grads(inputs, {true}, build);
  check_grad_fd(inputs, 0, scalar_fn(build), grads[0]);
}

TEST_CASE("flatten is a shape-preserving identity for gradients") {
  Rng rng(28);
  const std::vector<Tensor> inputs = {random_tensor({3, 2, 2, 2}, rng)};
  auto build = [](Tape& tp, const std::vector<Var>& v) {
    return sum_all(tp, flatten(tp, v[0]));
  };
  Tape tp;
  const Var x = tp.leaf(inputs[0], true);
  const Var f = flatten(tp, x);
  CHECK(tp.value(f).shape() == std::vector<std::int64_t>{3, 8});
  const auto grads = leaf_grads(inputs, {true}, build);
  check_grad_fd(inputs, 0, scalar_fn(build), grads[0]);
}

TEST_CASE("softmax cross entropy gradient matches finite differences") {
  Rng rng(29);
  const std::vector<Tensor> inputs = {random_tensor({5, 4}, rng, 2.0)};
  const std::vector<std::int64_t> labels = {0, 3, 1, 1, 2};
  auto build = [&labels](Tape& tp, const std::vector<Var>& v) {
    return softmax_cross_entropy(tp, v[0], labels);
  };
  const auto grads = leaf_grads(inputs, {true}, build);
  check_grad_fd(inputs, 0, scalar_fn(build), grads[0]);
}

TEST_CASE("softmax cross entropy equals -log p of the true class") {
  Tape tp;
  const Var logits = tp.leaf(Tensor::from_data({1, 3}, {1.0, 2.0, 3.0}), false);
  const double loss = tp.value(softmax_cross_entropy(tp, logits, {2}))[0];
  const double z = std::exp(1.0 - 3.0) + std::exp(2.0 - 3.0) + 1.0;
  CHECK(loss == doctest::Approx(-std::log(1.0 / z)).epsilon(1e-12));
}

TEST_CASE("softmax cross entropy is shift-invariant and handles huge logits") {
  Tape tp;
  const Var a = tp.leaf(Tensor::from_data({1, 2}, {1000.0, 1001.0}), false);
  const double loss = tp.value(softmax_cross_entropy(tp, a, {1}))[0];
  CHECK(loss == doctest::Approx(-std::log(1.0 / (1.0 + std::exp(-1.0)))).epsilon(1e-12));
}

TEST_CASE("softmax cross entropy rejects bad labels") {
  Tape tp;
  const Var logits = tp.leaf(Tensor::zeros({2, 3}), false);
  CHECK_THROWS_AS(softmax_cross_entropy(tp, logits, {0, 3}), std::invalid_argument);
  Tape tp2;
  const Var l2 = tp2.leaf(Tensor::zeros({2, 3}), false);
  CHECK_THROWS_AS(softmax_cross_entropy(tp2, l2, {0}), std::invalid_argument);
}

TEST_CASE("fake_quantize backward is the straight-through mask") {
  Rng rng(30);
  const Tensor x = random_tensor({64}, rng);

  QuantSpec spec;
  spec.bits = 3;
  for (const QuantKind kind :
       {QuantKind::max_scale_signed, QuantKind::max_scale_unsigned, QuantKind::dorefa}) {
    spec.kind = kind;
    Tape tp;
    const Var vx = tp.leaf(x, true);
    const Var q = fake_quantize(tp, vx, spec);
    // Forward must equal the plain quantizer call.
    const Tensor direct = apply_quantizer(x, spec);
    for (std::int64_t i = 0; i < x.size(); ++i) CHECK(tp.value(q)[i] == direct[i]);

    tp.backward(sum_all(tp, q));
    const Tensor expected = ste_backward(
        [&] {
          Tensor up(x.shape());
          for (std::int64_t i = 0; i < up.size(); ++i) up[i] = 0.5 + 0.25 * (i % 3);
          return up;
        }(),
        x, kind);
    const Tensor& g = tp.grad(vx);
    for (std::int64_t i = 0; i < x.size(); ++i) CHECK(g[i] == expected[i]);
  }
}

TEST_CASE("quantize_upstream_grad: identity forward, quantized backward") {
  Rng data_rng(31);
  const Tensor x = random_tensor({32}, data_rng);

  Rng rng_a(77);
  Tape tp;
  const Var vx = tp.leaf(x, true);
  const Var q = quantize_upstream_grad(tp, vx, 4, rng_a);
  for (std::int64_t i = 0; i < x.size(); ++i) CHECK(tp.value(q)[i] == x[i]);
  tp.backward(sum_all(tp, q));

  // The same upstream quantized directly with an identically seeded rng.
  Rng rng_b(77);
  Tensor up(x.shape());
  for (std::int64_t i = 0; i < up.size(); ++i) up[i] = 0.5 + 0.25 * (i % 3);
  const Tensor expected = quantize_max_scale(up, 4, true, Rounding::stochastic, &rng_b);
  const Tensor& g = tp.grad(vx);
  for (std::int64_t i = 0; i < x.size(); ++i) CHECK(g[i] == expected[i]);
}

TEST_CASE("quantize_upstream_grad at 32 bits appends nothing") {
  Rng rng(32);
  Tape tp;
  const Var vx = tp.leaf(Tensor::from_data({2}, {1.0, 2.0}), true);
  const std::size_t before = tp.size();
  const Var q = quantize_upstream_grad(tp, vx, 32, rng);
  CHECK(q.id == vx.id);
  CHECK(tp.size() == before);
}

TEST_CASE("tape is single-use until reset") {
  Tape tp;
  const Var x = tp.leaf(Tensor::scalar(2.0), true);
  const Var y = sum_all(tp, x);
  tp.backward(y);
  CHECK(tp.consumed());
  CHECK_THROWS_AS(tp.backward(y), std::logic_error);
  tp.reset();
  CHECK(tp.size() == 0);
  CHECK(!tp.consumed());
}

TEST_CASE("backward requires a scalar root that needs grad") {
  Tape tp;
  const Var vec_root = tp.leaf(Tensor::zeros({2}), true);
  CHECK_THROWS_AS(tp.backward(vec_root), std::invalid_argument);
  Tape tp2;
  const Var no_grad = tp2.leaf(Tensor::scalar(1.0), false);
  CHECK_THROWS_AS(tp2.backward(no_grad), std::invalid_argument);
}

TEST_CASE("gradients accumulate across fan-out") {
  Tape tp;
  const Var x = tp.leaf(Tensor::from_data({2}, {3.0, -1.0}), true);
  // Two heads over the same leaf: total gradient is the sum of both.
  const Var h1 = sum_all(tp, x);
  const Var h2 = sum_all(tp, x);
  const Var root = tp.push(
      Tensor::scalar(tp.value(h1)[0] + tp.value(h2)[0]), true,
      [h1, h2](Tape& t, const Tensor& up) {
        t.accumulate_grad(h1, up);
        t.accumulate_grad(h2, up);
      });
  tp.backward(root);
  const Tensor& g = tp.grad(x);
  CHECK(g[0] == doctest::Approx(2 * 0.5));
  CHECK(g[1] == doctest::Approx(2 * 0.75));
}

TEST_CASE("sgd_step follows the documented update rule") {
  // v <- m v + g + wd p; p <- p - lr v, pinned example from the docs:
  // p=1, g=1, v=0, lr=0.1, m=0.9, wd=0 -> p=0.9 then p=0.71.
  Tensor p = Tensor::scalar(1.0);
  Tensor g = Tensor::scalar(1.0);
  Tensor v = Tensor::zeros({1});
  sgd_step(p, g, v, 0.1, 0.9, 0.0);
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-15));
  sgd_step(p, g, v, 0.1, 0.9, 0.0);
  CHECK(p[0] == doctest::Approx(0.71).epsilon(1e-15));

  // Weight decay folds into the gradient.
  Tensor p2 = Tensor::scalar(2.0);
  Tensor g2 = Tensor::scalar(0.0);
  Tensor v2 = Tensor::zeros({1});
  sgd_step(p2, g2, v2, 0.1, 0.0, 0.5);
  CHECK(p2[0] == doctest::Approx(2.0 - 0.1 * (0.5 * 2.0)).epsilon(1e-15));
}
