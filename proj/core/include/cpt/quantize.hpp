#pragma once

#include "cpt/rng.hpp"
#include "cpt/tensor.hpp"

#include <string>

namespace cpt {

enum class Rounding {
  nearest_even,  // deterministic, ties to even
  stochastic,    // unbiased: floor(v) + Bernoulli(frac(v))
};

enum class QuantKind {
  max_scale_signed,    // symmetric, scale = max|x| / (2^(b-1) - 1)
  max_scale_unsigned,  // negatives clamped, scale = max(x) / (2^b - 1)
  dorefa,              // tanh-normalized weight quantizer mapping into [-1, 1]
};

Rounding parse_rounding(const std::string& name);
QuantKind parse_quant_kind(const std::string& name);
std::string to_string(Rounding r);
std::string to_string(QuantKind k);

struct QuantSpec {
  QuantKind kind = QuantKind::max_scale_signed;
  int bits = 32;
  Rounding rounding = Rounding::nearest_even;
};

// All quantizers:
//  - pass the input through untouched when the computed scale is zero,
//  - reject bits outside [2, 32] and non-finite inputs,
//  - simulate the low-precision grid in doubles (fake quantization).
// `rng` is consulted only for stochastic rounding and is required then.

// bits == 32 returns x unchanged.
Tensor quantize_max_scale(const Tensor& x, int bits, bool is_signed,
                          Rounding rounding = Rounding::nearest_even, Rng* rng = nullptr);

// Weights only, deterministic: w -> tanh(w)/(2 max|tanh(w)|) + 1/2,
// uniform grid of 2^b - 1 steps on [0, 1], then affine map to [-1, 1].
// bits == 32 applies only the tanh max-normalization (no grid).
Tensor quantize_dorefa(const Tensor& w, int bits);

Tensor apply_quantizer(const Tensor& x, const QuantSpec& spec, Rng* rng = nullptr);

// Straight-through gradient of a fake-quantized op: identity inside the
// representable range, zero outside. For the signed and dorefa kinds the
// whole input range is representable, so the mask is all ones; the
// unsigned kind clamps negatives, so their gradient is zero.
Tensor ste_backward(const Tensor& upstream, const Tensor& input, QuantKind kind);

}  // namespace cpt
