#include "cpt/autodiff.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace cpt {

Var Tape::leaf(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad, {});
}

Var Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&, const Tensor&)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Tape::Node& Tape::node(Var v) {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw std::logic_error("Tape: invalid Var handle");
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Tape::Node& Tape::node(Var v) const {
  return const_cast<Tape*>(this)->node(v);
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::needs_grad(Var v) const { return node(v).needs_grad; }

bool Tape::has_grad(Var v) const { return !node(v).grad.empty(); }

const Tensor& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty())
    throw std::logic_error("Tape::grad: no gradient was accumulated for this node");
  return n.grad;
}

void Tape::accumulate_grad(Var v, Tensor g) {
  Node& n = node(v);
  if (!g.same_shape(n.value))
    throw std::invalid_argument("Tape::accumulate_grad: gradient shape " + g.shape_string() +
                                " does not match value shape " + n.value.shape_string());
  if (n.grad.empty()) {
    n.grad = std::move(g);
    return;
  }
  for (std::int64_t i = 0; i < n.grad.size(); ++i) n.grad[i] += g[i];
}

void Tape::backward(Var root) {
  if (consumed_) throw std::logic_error("Tape::backward: tape already consumed; call reset() first");
  const Node& r = node(root);
  if (r.value.size() != 1)
    throw std::invalid_argument("Tape::backward: root must be a scalar");
  if (!r.needs_grad)
    throw std::invalid_argument("Tape::backward: root does not depend on any gradient leaf");
  consumed_ = true;
  Tensor seed(r.value.shape());
  seed.fill(1.0);
  accumulate_grad(root, std::move(seed));
  for (std::int32_t i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.back || n.grad.empty()) continue;
    n.back(*this, n.grad);
  }
}

void Tape::reset() {
  nodes_.clear();
  consumed_ = false;
}

namespace {

void check_ndim(const Tensor& t, int ndim, const char* what) {
  if (t.ndim() != ndim)
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(ndim) +
                                "-d tensor, got shape " + t.shape_string());
}

// col layout: [C*kh*kw, OH*OW], row-major.
void im2col(const double* x, std::int64_t C, std::int64_t H, std::int64_t W, int kh, int kw,
            int stride, int pad, std::int64_t OH, std::int64_t OW, double* col) {
  for (std::int64_t c = 0; c < C; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        double* row = col + ((c * kh + i) * kw + j) * OH * OW;
        for (std::int64_t oh = 0; oh < OH; ++oh) {
          std::int64_t ih = oh * stride - pad + i;
          for (std::int64_t ow = 0; ow < OW; ++ow) {
            std::int64_t iw = ow * stride - pad + j;
            bool in = ih >= 0 && ih < H && iw >= 0 && iw < W;
            row[oh * OW + ow] = in ? x[(c * H + ih) * W + iw] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, std::int64_t C, std::int64_t H, std::int64_t W, int kh, int kw,
                int stride, int pad, std::int64_t OH, std::int64_t OW, double* dx) {
  for (std::int64_t c = 0; c < C; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const double* row = col + ((c * kh + i) * kw + j) * OH * OW;
        for (std::int64_t oh = 0; oh < OH; ++oh) {
          std::int64_t ih = oh * stride - pad + i;
          if (ih < 0 || ih >= H) continue;
          for (std::int64_t ow = 0; ow < OW; ++ow) {
            std::int64_t iw = ow * stride - pad + j;
            if (iw < 0 || iw >= W) continue;
            dx[(c * H + ih) * W + iw] += row[oh * OW + ow];
          }
        }
      }
    }
  }
}

}  // namespace

Var matmul(Tape& tp, Var a, Var b) {
  const Tensor& A = tp.value(a);
  const Tensor& B = tp.value(b);
  check_ndim(A, 2, "matmul lhs");
  check_ndim(B, 2, "matmul rhs");
  if (A.dim(1) != B.dim(0))
    throw std::invalid_argument("matmul: inner dimensions differ, " + A.shape_string() + " x " +
                                B.shape_string());
  std::int64_t M = A.dim(0), K = A.dim(1), N = B.dim(1);
  Tensor C({M, N});
  for (std::int64_t i = 0; i < M; ++i)
    for (std::int64_t k = 0; k < K; ++k) {
      double aik = A[i * K + k];
      if (aik == 0.0) continue;
      const double* brow = B.data() + k * N;
      double* crow = C.data() + i * N;
      for (std::int64_t j = 0; j < N; ++j) crow[j] += aik * brow[j];
    }
  bool ng = tp.needs_grad(a) || tp.needs_grad(b);
  if (!ng) return tp.push(std::move(C), false, {});
  return tp.push(std::move(C), true, [a, b, M, K, N](Tape& t, const Tensor& up) {
    const Tensor& A = t.value(a);
    const Tensor& B = t.value(b);
    if (t.needs_grad(a)) {
      Tensor dA({M, K});
      for (std::int64_t i = 0; i < M; ++i)
        for (std::int64_t j = 0; j < N; ++j) {
          double u = up[i * N + j];
          if (u == 0.0) continue;
          const double* brow = B.data() + j;  // column j of B, stride N
          double* darow = dA.data() + i * K;
          for (std::int64_t k = 0; k < K; ++k) darow[k] += u * brow[k * N];
        }
      t.accumulate_grad(a, std::move(dA));
    }
    if (t.needs_grad(b)) {
      Tensor dB({K, N});
      for (std::int64_t i = 0; i < M; ++i)
        for (std::int64_t k = 0; k < K; ++k) {
          double aik = A[i * K + k];
          if (aik == 0.0) continue;
          const double* urow = up.data() + i * N;
          double* dbrow = dB.data() + k * N;
          for (std::int64_t j = 0; j < N; ++j) dbrow[j] += aik * urow[j];
        }
      t.accumulate_grad(b, std::move(dB));
    }
  });
}

Var conv2d(Tape& tp, Var x, Var w, int stride, int padding) {
  const Tensor& X = tp.value(x);
  const Tensor& W_ = tp.value(w);
  check_ndim(X, 4, "conv2d input");
  check_ndim(W_, 4, "conv2d weight");
  if (stride < 1 || padding < 0)
    throw std::invalid_argument("conv2d: requires stride >= 1 and padding >= 0");
  std::int64_t N = X.dim(0), C = X.dim(1), H = X.dim(2), Wd = X.dim(3);
  std::int64_t F = W_.dim(0);
  int kh = static_cast<int>(W_.dim(2)), kw = static_cast<int>(W_.dim(3));
  if (W_.dim(1) != C)
    throw std::invalid_argument("conv2d: weight channels " + W_.shape_string() +
                                " do not match input " + X.shape_string());
  std::int64_t OH = (H + 2 * padding - kh) / stride + 1;
  std::int64_t OW = (Wd + 2 * padding - kw) / stride + 1;
  if (H + 2 * padding < kh || Wd + 2 * padding < kw || OH < 1 || OW < 1)
    throw std::invalid_argument("conv2d: kernel larger than padded input");

  std::int64_t ckk = C * kh * kw;
  std::int64_t ohw = OH * OW;
  auto cols = std::make_shared<std::vector<double>>(static_cast<std::size_t>(N * ckk * ohw));
  Tensor Y({N, F, OH, OW});
  for (std::int64_t n = 0; n < N; ++n) {
    double* col = cols->data() + n * ckk * ohw;
    im2col(X.data() + n * C * H * Wd, C, H, Wd, kh, kw, stride, padding, OH, OW, col);
    for (std::int64_t f = 0; f < F; ++f) {
      double* yrow = Y.data() + (n * F + f) * ohw;
      const double* wrow = W_.data() + f * ckk;
      for (std::int64_t r = 0; r < ckk; ++r) {
        double wv = wrow[r];
        if (wv == 0.0) continue;
        const double* crow = col + r * ohw;
        for (std::int64_t o = 0; o < ohw; ++o) yrow[o] += wv * crow[o];
      }
    }
  }

  bool ng = tp.needs_grad(x) || tp.needs_grad(w);
  if (!ng) return tp.push(std::move(Y), false, {});
  auto xshape = X.shape();
  return tp.push(std::move(Y), true,
                 [x, w, cols, xshape, N, C, H, Wd, F, kh, kw, stride, padding, OH, OW, ckk,
                  ohw](Tape& t, const Tensor& up) {
    const Tensor& W_ = t.value(w);
    if (t.needs_grad(w)) {
      Tensor dW(W_.shape());
      for (std::int64_t n = 0; n < N; ++n) {
        const double* col = cols->data() + n * ckk * ohw;
        for (std::int64_t f = 0; f < F; ++f) {
          const double* urow = up.data() + (n * F + f) * ohw;
          double* dwrow = dW.data() + f * ckk;
          for (std::int64_t r = 0; r < ckk; ++r) {
            const double* crow = col + r * ohw;
            double acc = 0.0;
            for (std::int64_t o = 0; o < ohw; ++o) acc += urow[o] * crow[o];
            dwrow[r] += acc;
          }
        }
      }
      t.accumulate_grad(w, std::move(dW));
    }
    if (t.needs_grad(x)) {
      Tensor dX(xshape);
      std::vector<double> dcol(static_cast<std::size_t>(ckk * ohw));
      for (std::int64_t n = 0; n < N; ++n) {
        std::fill(dcol.begin(), dcol.end(), 0.0);
        for (std::int64_t f = 0; f < F; ++f) {
          const double* urow = up.data() + (n * F + f) * ohw;
          const double* wrow = W_.data() + f * ckk;
          for (std::int64_t r = 0; r < ckk; ++r) {
            double wv = wrow[r];
            if (wv == 0.0) continue;
            double* drow = dcol.data() + r * ohw;
            for (std::int64_t o = 0; o < ohw; ++o) drow[o] += wv * urow[o];
          }
        }
        col2im_add(dcol.data(), C, H, Wd, kh, kw, stride, padding, OH, OW,
                   dX.data() + n * C * H * Wd);
      }
      t.accumulate_grad(x, std::move(dX));
    }
  });
}

Var add_bias(Tape& tp, Var x, Var b) {
  const Tensor& X = tp.value(x);
  const Tensor& B = tp.value(b);
  check_ndim(B, 1, "add_bias bias");
  std::int64_t channels = B.dim(0);
  std::int64_t outer = 0, inner = 0;
  if (X.ndim() == 2 && X.dim(1) == channels) {
    outer = X.dim(0);
    inner = 1;
  } else if (X.ndim() == 4 && X.dim(1) == channels) {
    outer = X.dim(0);
    inner = X.dim(2) * X.dim(3);
  } else {
    throw std::invalid_argument("add_bias: input " + X.shape_string() +
                                " incompatible with bias " + B.shape_string());
  }
  Tensor Y(X.shape());
  for (std::int64_t n = 0; n < outer; ++n)
    for (std::int64_t c = 0; c < channels; ++c) {
      double bv = B[c];
      const double* xrow = X.data() + (n * channels + c) * inner;
      double* yrow = Y.data() + (n * channels + c) * inner;
      for (std::int64_t i = 0; i < inner; ++i) yrow[i] = xrow[i] + bv;
    }
  bool ng = tp.needs_grad(x) || tp.needs_grad(b);
  if (!ng) return tp.push(std::move(Y), false, {});
  return tp.push(std::move(Y), true, [x, b, outer, channels, inner](Tape& t, const Tensor& up) {
    if (t.needs_grad(x)) t.accumulate_grad(x, up);
    if (t.needs_grad(b)) {
      Tensor dB({channels});
      for (std::int64_t n = 0; n < outer; ++n)
        for (std::int64_t c = 0; c < channels; ++c) {
          const double* urow = up.data() + (n * channels + c) * inner;
          double acc = 0.0;
          for (std::int64_t i = 0; i < inner; ++i) acc += urow[i];
          dB[c] += acc;
        }
      t.accumulate_grad(b, std::move(dB));
    }
  });
}

Var relu(Tape& tp, Var x) {
  const Tensor& X = tp.value(x);
  Tensor Y(X.shape());
  for (std::int64_t i = 0; i < X.size(); ++i) Y[i] = X[i] > 0.0 ? X[i] : 0.0;
  if (!tp.needs_grad(x)) return tp.push(std::move(Y), false, {});
  return tp.push(std::move(Y), true, [x](Tape& t, const Tensor& up) {
    const Tensor& X = t.value(x);
    Tensor dX(X.shape());
    for (std::int64_t i = 0; i < X.size(); ++i) dX[i] = X[i] > 0.0 ? up[i] : 0.0;
    t.accumulate_grad(x, std::move(dX));
  });
}

Var avgpool2d(Tape& tp, Var x, int k) {
  const Tensor& X = tp.value(x);
  check_ndim(X, 4, "avgpool2d input");
  if (k < 1) throw std::invalid_argument("avgpool2d: kernel must be >= 1");
  std::int64_t N = X.dim(0), C = X.dim(1), H = X.dim(2), W = X.dim(3);
  std::int64_t OH = H / k, OW = W / k;
  if (OH < 1 || OW < 1)
    throw std::invalid_argument("avgpool2d: kernel " + std::to_string(k) +
                                " larger than input " + X.shape_string());
  double inv = 1.0 / (static_cast<double>(k) * k);
  Tensor Y({N, C, OH, OW});
  for (std::int64_t nc = 0; nc < N * C; ++nc) {
    const double* xp = X.data() + nc * H * W;
    double* yp = Y.data() + nc * OH * OW;
    for (std::int64_t oh = 0; oh < OH; ++oh)
      for (std::int64_t ow = 0; ow < OW; ++ow) {
        double acc = 0.0;
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) acc += xp[(oh * k + i) * W + ow * k + j];
        yp[oh * OW + ow] = acc * inv;
      }
  }
  if (!tp.needs_grad(x)) return tp.push(std::move(Y), false, {});
  auto xshape = X.shape();
  return tp.push(std::move(Y), true,
                 [x, xshape, N, C, H, W, OH, OW, k, inv](Tape& t, const Tensor& up) {
    Tensor dX(xshape);
    for (std::int64_t nc = 0; nc < N * C; ++nc) {
      double* dxp = dX.data() + nc * H * W;
      const double* upp = up.data() + nc * OH * OW;
      for (std::int64_t oh = 0; oh < OH; ++oh)
        for (std::int64_t ow = 0; ow < OW; ++ow) {
          double g = upp[oh * OW + ow] * inv;
          for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) dxp[(oh * k + i) * W + ow * k + j] += g;
        }
    }
    t.accumulate_grad(x, std::move(dX));
  });
}

Var flatten(Tape& tp, Var x) {
  const Tensor& X = tp.value(x);
  if (X.ndim() < 2) throw std::invalid_argument("flatten: input must have at least 2 dims");
  std::int64_t N = X.dim(0);
  Tensor Y = X.reshaped({N, X.size() / N});
  if (!tp.needs_grad(x)) return tp.push(std::move(Y), false, {});
  auto xshape = X.shape();
  return tp.push(std::move(Y), true, [x, xshape](Tape& t, const Tensor& up) {
    t.accumulate_grad(x, up.reshaped(xshape));
  });
}

Var softmax_cross_entropy(Tape& tp, Var logits, const std::vector<std::int64_t>& labels) {
  const Tensor& L = tp.value(logits);
  check_ndim(L, 2, "softmax_cross_entropy logits");
  std::int64_t N = L.dim(0), C = L.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != N)
    throw std::invalid_argument("softmax_cross_entropy: label count does not match batch size");
  for (std::int64_t y : labels)
    if (y < 0 || y >= C)
      throw std::invalid_argument("softmax_cross_entropy: label out of range [0, " +
                                  std::to_string(C) + ")");
  Tensor probs({N, C});
  double total = 0.0;
  for (std::int64_t n = 0; n < N; ++n) {
    const double* row = L.data() + n * C;
    double m = row[0];
    for (std::int64_t c = 1; c < C; ++c) m = std::max(m, row[c]);
    double sum = 0.0;
    double* prow = probs.data() + n * C;
    for (std::int64_t c = 0; c < C; ++c) {
      prow[c] = std::exp(row[c] - m);
      sum += prow[c];
    }
    for (std::int64_t c = 0; c < C; ++c) prow[c] /= sum;
    total += -(row[labels[static_cast<std::size_t>(n)]] - m - std::log(sum));
  }
  Tensor loss = Tensor::scalar(total / static_cast<double>(N));
  if (!tp.needs_grad(logits)) return tp.push(std::move(loss), false, {});
  return tp.push(std::move(loss), true,
                 [logits, labels, probs = std::move(probs), N, C](Tape& t, const Tensor& up) {
    double scale = up[0] / static_cast<double>(N);
    Tensor dL({N, C});
    for (std::int64_t n = 0; n < N; ++n) {
      const double* prow = probs.data() + n * C;
      double* drow = dL.data() + n * C;
      for (std::int64_t c = 0; c < C; ++c) drow[c] = prow[c] * scale;
      drow[labels[static_cast<std::size_t>(n)]] -= scale;
    }
    t.accumulate_grad(logits, std::move(dL));
  });
}

Var fake_quantize(Tape& tp, Var x, const QuantSpec& spec, Rng* rng) {
  Tensor y = apply_quantizer(tp.value(x), spec, rng);
  if (!tp.needs_grad(x)) return tp.push(std::move(y), false, {});
  QuantKind kind = spec.kind;
  return tp.push(std::move(y), true, [x, kind](Tape& t, const Tensor& up) {
    t.accumulate_grad(x, ste_backward(up, t.value(x), kind));
  });
}

Var quantize_upstream_grad(Tape& tp, Var x, int bits, Rng& rng) {
  if (bits == 32) return x;
  Tensor y = tp.value(x);
  if (!tp.needs_grad(x)) return tp.push(std::move(y), false, {});
  Rng* rp = &rng;
  return tp.push(std::move(y), true, [x, bits, rp](Tape& t, const Tensor& up) {
    t.accumulate_grad(x, quantize_max_scale(up, bits, true, Rounding::stochastic, rp));
  });
}

void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum,
              double weight_decay) {
  if (!param.same_shape(grad) || !param.same_shape(velocity))
    throw std::invalid_argument("sgd_step: param, grad and velocity shapes must match");
  for (std::int64_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i] + weight_decay * param[i];
    param[i] -= lr * velocity[i];
  }
}

}  // namespace cpt
