#include "cpt/numerics.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <string>

using namespace cpt;

TEST_CASE("round_half_even matches nearbyint under banker's rounding") {
  CHECK(round_half_even(0.0) == 0.0);
  CHECK(round_half_even(0.5) == 0.0);
  CHECK(round_half_even(1.5) == 2.0);
  CHECK(round_half_even(2.5) == 2.0);
  CHECK(round_half_even(3.5) == 4.0);
  CHECK(round_half_even(5.5) == 6.0);
  CHECK(round_half_even(-0.5) == 0.0);
  CHECK(round_half_even(-1.5) == -2.0);
  CHECK(round_half_even(-2.5) == -2.0);
  CHECK(round_half_even(2.4999999) == 2.0);
  CHECK(round_half_even(2.5000001) == 3.0);
}

TEST_CASE("round_half_even equals std::nearbyint in FE_TONEAREST over a dense grid") {
  for (int i = -40000; i <= 40000; ++i) {
    const double x = i / 16.0;  // dyadic: exact ties occur at .5 exactly
    CHECK(round_half_even(x) == std::nearbyint(x));
  }
}

TEST_CASE("round_half_even_rational: exact integer ties") {
  // 7/2 -> 4 (even), 5/2 -> 2 (even), 1/2 -> 0
  CHECK(round_half_even_rational(7, 2) == 4);
  CHECK(round_half_even_rational(5, 2) == 2);
  CHECK(round_half_even_rational(1, 2) == 0);
  CHECK(round_half_even_rational(3, 2) == 2);
  CHECK(round_half_even_rational(0, 5) == 0);
  CHECK(round_half_even_rational(10, 5) == 2);
  CHECK(round_half_even_rational(11, 5) == 2);  // 2.2
  CHECK(round_half_even_rational(13, 5) == 3);  // 2.6
}

TEST_CASE("round_half_even_rational agrees with float rounding away from ties") {
  for (std::int64_t den = 1; den <= 23; ++den) {
    for (std::int64_t num = 0; num <= 400; ++num) {
      if ((2 * num) % (2 * den) == den) continue;  // exact tie: float may misrepresent
      CHECK(round_half_even_rational(num, den) ==
            static_cast<std::int64_t>(round_half_even(static_cast<double>(num) /
                                                      static_cast<double>(den))));
    }
  }
}

TEST_CASE("cos_pi_frac: exact rational angles") {
  CHECK(cos_pi_frac(0, 7) == 1.0);
  CHECK(cos_pi_frac(7, 7) == -1.0);
  CHECK(cos_pi_frac(1, 2) == 0.0);
  CHECK(cos_pi_frac(2, 4) == 0.0);
  CHECK(cos_pi_frac(1, 3) == 0.5);
  CHECK(cos_pi_frac(2, 6) == 0.5);
  CHECK(cos_pi_frac(2, 3) == -0.5);
  CHECK(cos_pi_frac(4, 6) == -0.5);
}

TEST_CASE("cos_pi_frac tracks std::cos elsewhere") {
  for (int den = 1; den <= 40; ++den) {
    for (int num = 0; num <= den; ++num) {
      const double expect = std::cos(M_PI * num / den);
      CHECK(cos_pi_frac(num, den) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("format_double: shortest round-trip representation") {
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(0.05) == "0.05");
  CHECK(format_double(-2.5) == "-2.5");
  CHECK(format_double(1e300) == "1e+300");

  // Round trip is exact. strtod instead of stod: stod throws on the
  // ERANGE that subnormals like 5e-324 legitimately set.
  for (const double v : {1.0 / 3.0, 0.3, 123.456, -9.999e-7, 5e-324}) {
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
}

TEST_CASE("format_double: non-finite values spelled out") {
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}
