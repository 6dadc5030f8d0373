#include "cpt/numerics.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace cpt {

double round_half_even(double v) {
  double f = std::floor(v);
  double frac = v - f;
  if (frac < 0.5) return f;
  if (frac > 0.5) return f + 1.0;
  // Exact tie: pick the even neighbour.
  return (std::fmod(f, 2.0) == 0.0) ? f : f + 1.0;
}

std::int64_t round_half_even_rational(std::int64_t num, std::int64_t den) {
  if (num < 0 || den <= 0)
    throw std::invalid_argument("round_half_even_rational: requires num >= 0 and den > 0");
  std::int64_t q = num / den;
  std::int64_t r = num % den;
  if (2 * r < den) return q;
  if (2 * r > den) return q + 1;
  return (q % 2 == 0) ? q : q + 1;
}

double cos_pi_frac(std::int64_t k, std::int64_t n) {
  if (n <= 0 || k < 0 || k > n) throw std::invalid_argument("cos_pi_frac: requires 0 <= k <= n");
  if (k == 0) return 1.0;
  if (k == n) return -1.0;
  if (2 * k == n) return 0.0;
  if (3 * k == n) return 0.5;
  if (3 * k == 2 * n) return -0.5;
  return std::cos(3.14159265358979323846 * static_cast<double>(k) / static_cast<double>(n));
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

}  // namespace cpt
