#include "cpt/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace cpt {

SchedulePattern parse_schedule_pattern(const std::string& name) {
  if (name == "cosine") return SchedulePattern::cosine;
  if (name == "cosine_anneal") return SchedulePattern::cosine_anneal;
  if (name == "triangular") return SchedulePattern::triangular;
  if (name == "static") return SchedulePattern::static_bits;
  if (name == "progressive") return SchedulePattern::progressive;
  throw std::invalid_argument("unknown schedule pattern: " + name);
}

std::string to_string(SchedulePattern p) {
  switch (p) {
    case SchedulePattern::cosine: return "cosine";
    case SchedulePattern::cosine_anneal: return "cosine_anneal";
    case SchedulePattern::triangular: return "triangular";
    case SchedulePattern::static_bits: return "static";
    case SchedulePattern::progressive: return "progressive";
  }
  throw std::logic_error("unreachable");
}

void PrecisionSchedule::validate() const {
  if (b_min < 2) throw std::invalid_argument("schedule: b_min must be >= 2");
  if (b_max > 32) throw std::invalid_argument("schedule: b_max must be <= 32");
  if (b_min > b_max) throw std::invalid_argument("schedule: b_min must be <= b_max");
  if (total_epochs < 1) throw std::invalid_argument("schedule: total_epochs must be >= 1");
  if (num_cycles < 1) throw std::invalid_argument("schedule: num_cycles must be >= 1");
  if (num_cycles > total_epochs)
    throw std::invalid_argument("schedule: num_cycles must be <= total_epochs");
}

namespace {

int cosine_bits(const PrecisionSchedule& s, std::int64_t k, std::int64_t T, bool anneal) {
  double c = cos_pi_frac(k, T);
  double span = static_cast<double>(s.b_max - s.b_min);
  double raw = anneal ? s.b_min + 0.5 * span * (1.0 + c)
                      : s.b_min + 0.5 * span * (1.0 - c);
  return static_cast<int>(round_half_even(raw));
}

int triangular_bits(const PrecisionSchedule& s, std::int64_t k, std::int64_t T) {
  if (T == 1) return s.b_min;
  // Linear ramp hitting b_min at k=0 and b_max at k=T-1 exactly.
  std::int64_t span = s.b_max - s.b_min;
  return s.b_min + static_cast<int>(round_half_even_rational(span * k, T - 1));
}

}  // namespace

int bits_at(const PrecisionSchedule& s, int t) {
  s.validate();
  if (t < 0 || t >= s.total_epochs)
    throw std::out_of_range("bits_at: epoch index outside [0, total_epochs)");
  switch (s.pattern) {
    case SchedulePattern::static_bits:
      return s.b_max;
    case SchedulePattern::progressive: {
      std::int64_t half = s.total_epochs / 2;
      if (half < 2 || t >= half) return s.b_max;
      std::int64_t span = s.b_max - s.b_min;
      return s.b_min + static_cast<int>(round_half_even_rational(span * t, half - 1));
    }
    default:
      break;
  }
  std::int64_t T = s.cycle_length();
  std::int64_t k = t % T;
  switch (s.pattern) {
    case SchedulePattern::cosine: return cosine_bits(s, k, T, false);
    case SchedulePattern::cosine_anneal: return cosine_bits(s, k, T, true);
    case SchedulePattern::triangular: return triangular_bits(s, k, T);
    default: throw std::logic_error("unreachable");
  }
}

int bits_at_fractional(const PrecisionSchedule& s, double t) {
  s.validate();
  if (!(t >= 0.0) || t >= static_cast<double>(s.total_epochs))
    throw std::out_of_range("bits_at_fractional: position outside [0, total_epochs)");
  if (t == std::floor(t)) return bits_at(s, static_cast<int>(t));
  switch (s.pattern) {
    case SchedulePattern::static_bits:
      return s.b_max;
    case SchedulePattern::progressive: {
      double half = static_cast<double>(s.total_epochs / 2);
      if (half < 2.0 || t >= half) return s.b_max;
      double raw = s.b_min + (s.b_max - s.b_min) * t / (half - 1.0);
      return static_cast<int>(round_half_even(std::min(raw, static_cast<double>(s.b_max))));
    }
    default:
      break;
  }
  double T = static_cast<double>(s.cycle_length());
  double k = std::fmod(t, T);
  double span = static_cast<double>(s.b_max - s.b_min);
  double c = std::cos(3.14159265358979323846 * k / T);
  double raw = 0.0;
  switch (s.pattern) {
    case SchedulePattern::cosine: raw = s.b_min + 0.5 * span * (1.0 - c); break;
    case SchedulePattern::cosine_anneal: raw = s.b_min + 0.5 * span * (1.0 + c); break;
    case SchedulePattern::triangular:
      raw = (T == 1.0) ? s.b_min : s.b_min + span * std::min(k / (T - 1.0), 1.0);
      break;
    default: throw std::logic_error("unreachable");
  }
  return static_cast<int>(round_half_even(raw));
}

void LrSchedule::validate() const {
  if (boundaries.empty() || boundaries.size() != lrs.size())
    throw std::invalid_argument("lr schedule: boundaries and lrs must be non-empty, equal length");
  int prev = 0;
  for (std::size_t i = 0; i < boundaries.size(); ++i) {
    if (boundaries[i] <= prev)
      throw std::invalid_argument("lr schedule: boundaries must be positive and strictly increasing");
    prev = boundaries[i];
    if (!(lrs[i] > 0.0)) throw std::invalid_argument("lr schedule: learning rates must be positive");
  }
}

double lr_at(const LrSchedule& s, int t) {
  s.validate();
  if (t < 0 || t >= s.boundaries.back())
    throw std::out_of_range("lr_at: epoch index outside schedule range");
  for (std::size_t i = 0; i < s.boundaries.size(); ++i)
    if (t < s.boundaries[i]) return s.lrs[i];
  throw std::logic_error("unreachable");
}

double cyclic_lr_at(int t, double lr_max, double lr_min, int period) {
  if (period < 1) throw std::invalid_argument("cyclic_lr_at: period must be >= 1");
  if (!(lr_min > 0.0) || !(lr_max >= lr_min))
    throw std::invalid_argument("cyclic_lr_at: requires 0 < lr_min <= lr_max");
  if (t < 0) throw std::out_of_range("cyclic_lr_at: negative epoch index");
  std::int64_t k = t % period;
  double c = cos_pi_frac(k, period);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + c);
}

}  // namespace cpt
