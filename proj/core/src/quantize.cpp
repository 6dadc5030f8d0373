#include "cpt/quantize.hpp"

#include "cpt/errors.hpp"
#include "cpt/numerics.hpp"

#include <cmath>
#include <stdexcept>

namespace cpt {

Rounding parse_rounding(const std::string& name) {
  if (name == "nearest_even") return Rounding::nearest_even;
  if (name == "stochastic") return Rounding::stochastic;
  throw std::invalid_argument("unknown rounding mode: " + name);
}

QuantKind parse_quant_kind(const std::string& name) {
  if (name == "max_scale_signed") return QuantKind::max_scale_signed;
  if (name == "max_scale_unsigned") return QuantKind::max_scale_unsigned;
  if (name == "dorefa") return QuantKind::dorefa;
  throw std::invalid_argument("unknown quantizer kind: " + name);
}

std::string to_string(Rounding r) {
  return r == Rounding::nearest_even ? "nearest_even" : "stochastic";
}

std::string to_string(QuantKind k) {
  switch (k) {
    case QuantKind::max_scale_signed: return "max_scale_signed";
    case QuantKind::max_scale_unsigned: return "max_scale_unsigned";
    case QuantKind::dorefa: return "dorefa";
  }
  throw std::logic_error("unreachable");
}

namespace {

void check_bits(int bits) {
  if (bits < 2 || bits > 32)
    throw std::invalid_argument("quantizer bits must be in [2, 32], got " + std::to_string(bits));
}

double round_value(double v, Rounding rounding, Rng* rng) {
  if (rounding == Rounding::nearest_even) return round_half_even(v);
  double f = std::floor(v);
  double frac = v - f;
  if (frac == 0.0) return f;
  return rng->bernoulli(frac) ? f + 1.0 : f;
}

}  // namespace

Tensor quantize_max_scale(const Tensor& x, int bits, bool is_signed, Rounding rounding, Rng* rng) {
  check_bits(bits);
  x.require_finite("quantizer input");
  if (rounding == Rounding::stochastic && rng == nullptr)
    throw std::invalid_argument("stochastic rounding requires an Rng");
  if (bits == 32) return x;

  // Level count: signed keeps a symmetric grid (no -2^(b-1) level).
  double levels = is_signed ? std::ldexp(1.0, bits - 1) - 1.0 : std::ldexp(1.0, bits) - 1.0;
  double peak = 0.0;
  if (is_signed) {
    peak = x.max_abs();
  } else {
    for (double v : x.values()) peak = std::max(peak, v);
  }
  if (peak == 0.0) return x;

  double scale = peak / levels;
  Tensor out(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) {
    double v = is_signed ? x[i] : std::max(x[i], 0.0);
    double q = round_value(v / scale, rounding, rng);
    double lo = is_signed ? -levels : 0.0;
    q = std::min(std::max(q, lo), levels);
    out[i] = q * scale;
  }
  return out;
}

Tensor quantize_dorefa(const Tensor& w, int bits) {
  check_bits(bits);
  w.require_finite("quantizer input");

  Tensor t(w.shape());
  double peak = 0.0;
  for (std::int64_t i = 0; i < w.size(); ++i) {
    t[i] = std::tanh(w[i]);
    peak = std::max(peak, std::fabs(t[i]));
  }
  if (peak == 0.0) return w;

  Tensor out(w.shape());
  if (bits == 32) {
    // No grid at full precision, only the tanh max-normalization.
    for (std::int64_t i = 0; i < w.size(); ++i) out[i] = t[i] / peak;
    return out;
  }
  double levels = std::ldexp(1.0, bits) - 1.0;
  for (std::int64_t i = 0; i < w.size(); ++i) {
    double z = t[i] / (2.0 * peak) + 0.5;  // [0, 1]
    double q = round_half_even(z * levels) / levels;
    out[i] = 2.0 * q - 1.0;
  }
  return out;
}

Tensor apply_quantizer(const Tensor& x, const QuantSpec& spec, Rng* rng) {
  switch (spec.kind) {
    case QuantKind::max_scale_signed:
      return quantize_max_scale(x, spec.bits, true, spec.rounding, rng);
    case QuantKind::max_scale_unsigned:
      return quantize_max_scale(x, spec.bits, false, spec.rounding, rng);
    case QuantKind::dorefa:
      if (spec.rounding != Rounding::nearest_even)
        throw std::invalid_argument("dorefa quantizer is deterministic; rounding must be nearest_even");
      return quantize_dorefa(x, spec.bits);
  }
  throw std::logic_error("unreachable");
}

Tensor ste_backward(const Tensor& upstream, const Tensor& input, QuantKind kind) {
  if (!upstream.same_shape(input))
    throw std::invalid_argument("ste_backward: upstream and input shapes differ");
  if (kind != QuantKind::max_scale_unsigned) return upstream;
  Tensor out(upstream.shape());
  for (std::int64_t i = 0; i < upstream.size(); ++i)
    out[i] = input[i] < 0.0 ? 0.0 : upstream[i];
  return out;
}

}  // namespace cpt
