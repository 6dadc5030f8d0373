#pragma once

#include "cpt/train.hpp"

#include <functional>
#include <string>
#include <vector>

namespace cpt {

struct PrtConfig {
  int start_bits = 2;
  int max_probe_bits = 8;
  int epochs_per_probe = 1;
  int window = 50;         // number of consecutive-iteration deltas averaged
  double threshold = 1.0;  // accuracy points

  void validate() const;  // throws ConfigError
};

struct PrtProbe {
  int bits = 0;
  double delta = 0.0;  // mean training-accuracy delta over the window
};

struct PrtResult {
  int lower_bound_bits = 0;
  std::vector<PrtProbe> trace;
  bool converged = false;
};

// Yields per-iteration training-batch accuracies (percent) from
// training `epochs` more epochs at `bits`, continuing the same model.
using ProbeRunner = std::function<std::vector<double>(int bits, int epochs)>;

// Mean of the last `window` consecutive differences of the sequence
// (fewer if the sequence is shorter); 0 when under two points.
double mean_accuracy_delta(const std::vector<double>& accs, int window);

// Probes bits = start_bits, start_bits+1, ... in one continued training
// run and returns the first width whose delta exceeds the threshold.
// If none does by max_probe_bits, converged is false and the bound is
// max_probe_bits. The probe budget (probes x epochs_per_probe) must fit
// within first_cycle_epochs or the config is rejected.
PrtResult run_prt(const PrtConfig& cfg, int first_cycle_epochs, const ProbeRunner& probe);

// Schedule bounds from a PRT result: the detected lower bound plus the
// static baseline's width as the upper bound. A lower bound above the
// baseline means the model needs more bits than the target budget has.
std::pair<int, int> resolve_bounds(const PrtResult& result, int static_baseline_bits);

// Adapter: probe runner that advances a Trainer one epoch at a time at
// the forced forward width, keeping the planned backward width and lr.
ProbeRunner trainer_probe_runner(Trainer& trainer);

std::string prt_result_to_json(const PrtResult& r);
std::string prt_trace_to_csv(const PrtResult& r);

}  // namespace cpt
