#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpt {

// Deterministic random source. All draws are derived directly from the
// mt19937_64 output stream instead of std:: distributions, whose results
// (and internal caching) vary across standard library implementations.
// One Rng instance drives an entire run so that a run is reproducible
// from its seed alone, and the engine state round-trips through text for
// checkpointing.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, n). Modulo bias is below 2^-50 for any n this
  // project uses, far under the resolution anything downstream observes.
  std::int64_t uniform_int(std::int64_t n) {
    return static_cast<std::int64_t>(gen_() % static_cast<std::uint64_t>(n));
  }

  // Box-Muller without the cached second variate: each call consumes
  // exactly two uniforms, so the draw count is a pure function of call
  // count and serialized state never hides a pending sample.
  double normal() {
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 == 0.0);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Fisher-Yates, fixed draw order.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<std::int64_t>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::string save_state() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }

  void restore_state(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
    if (is.fail()) throw std::invalid_argument("Rng::restore_state: malformed state string");
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace cpt
