#pragma once

#include <cstdint>
#include <string>

namespace cpt {

// Round to nearest integer, ties to even, independent of the process
// rounding mode (std::nearbyint depends on it, std::round breaks ties
// away from zero).
double round_half_even(double v);

// round(num/den) with ties to even, in exact integer arithmetic.
// Requires num >= 0, den > 0.
std::int64_t round_half_even_rational(std::int64_t num, std::int64_t den);

// cos(pi * k / n) for integers 0 <= k <= n. The rational multiples of
// pi whose cosine is itself rational (k/n in {0, 1/3, 1/2, 2/3, 1}) are
// returned exactly so that downstream half-even ties are decided by
// arithmetic, not by floating-point representation error.
double cos_pi_frac(std::int64_t k, std::int64_t n);

// Shortest decimal string that parses back to exactly v. Infinities and
// NaN print as inf/-inf/nan.
std::string format_double(double v);

}  // namespace cpt
