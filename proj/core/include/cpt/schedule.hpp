#pragma once

#include "cpt/numerics.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cpt {

enum class SchedulePattern {
  cosine,         // low -> high within each cycle, cosine ramp
  cosine_anneal,  // high -> low within each cycle
  triangular,     // linear ramp low -> high within each cycle
  static_bits,    // constant b_max
  progressive,    // linear ramp over the first half of training, then b_max
};

SchedulePattern parse_schedule_pattern(const std::string& name);
std::string to_string(SchedulePattern p);

// Cyclic precision schedule: bit-width assigned to forward tensors as a
// function of the epoch index. Training time is split into num_cycles
// cycles of length floor(total_epochs / num_cycles); leftover epochs run
// the start of one further (truncated) cycle.
struct PrecisionSchedule {
  int b_min = 3;
  int b_max = 8;
  int total_epochs = 160;
  int num_cycles = 32;
  SchedulePattern pattern = SchedulePattern::cosine;

  int cycle_length() const { return total_epochs / num_cycles; }
  // Throws std::invalid_argument on any violated bound.
  void validate() const;
};

// Bit-width at integer epoch t, 0 <= t < total_epochs.
int bits_at(const PrecisionSchedule& s, int t);

// Bit-width at fractional epoch position (per-iteration cycling). Agrees
// with bits_at at integer t.
int bits_at_fractional(const PrecisionSchedule& s, double t);

// Piecewise-constant learning rate: lrs[i] applies on [prev, boundaries[i])
// with prev starting at 0, so each boundary epoch belongs to the
// following stage. boundaries.back() is the total epoch count.
struct LrSchedule {
  std::vector<int> boundaries;
  std::vector<double> lrs;

  void validate() const;
};

double lr_at(const LrSchedule& s, int t);

// Cyclic learning rate (cosine decay from lr_max to lr_min over each
// period of `period` epochs).
double cyclic_lr_at(int t, double lr_max, double lr_min, int period);

}  // namespace cpt
