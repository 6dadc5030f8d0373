#include "cpt/prt.hpp"

#include "cpt/errors.hpp"
#include "cpt/numerics.hpp"

#include <nlohmann/json.hpp>

namespace cpt {

void PrtConfig::validate() const {
  if (start_bits < 2) throw ConfigError("prt: start_bits must be >= 2");
  if (max_probe_bits < start_bits || max_probe_bits > 32)
    throw ConfigError("prt: max_probe_bits must be in [start_bits, 32]");
  if (epochs_per_probe < 1) throw ConfigError("prt: epochs_per_probe must be >= 1");
  if (window < 2) throw ConfigError("prt: window must be >= 2");
  if (!(threshold > 0.0)) throw ConfigError("prt: threshold must be > 0");
}

double mean_accuracy_delta(const std::vector<double>& accs, int window) {
  if (accs.size() < 2) return 0.0;
  std::size_t diffs = accs.size() - 1;
  std::size_t take = std::min(static_cast<std::size_t>(window), diffs);
  double sum = 0.0;
  for (std::size_t i = diffs - take; i < diffs; ++i) sum += accs[i + 1] - accs[i];
  return sum / static_cast<double>(take);
}

PrtResult run_prt(const PrtConfig& cfg, int first_cycle_epochs, const ProbeRunner& probe) {
  cfg.validate();
  int probes = cfg.max_probe_bits - cfg.start_bits + 1;
  if (probes * cfg.epochs_per_probe > first_cycle_epochs)
    throw ConfigError("prt: probe budget " + std::to_string(probes * cfg.epochs_per_probe) +
                      " epochs exceeds the first cycle (" + std::to_string(first_cycle_epochs) +
                      " epochs)");
  if (!probe) throw ConfigError("prt: no probe runner provided");

  PrtResult result;
  for (int bits = cfg.start_bits; bits <= cfg.max_probe_bits; ++bits) {
    std::vector<double> accs = probe(bits, cfg.epochs_per_probe);
    if (accs.empty()) throw ConfigError("prt: probe produced no iterations (empty data?)");
    double delta = mean_accuracy_delta(accs, cfg.window);
    result.trace.push_back({bits, delta});
    if (delta > cfg.threshold) {
      result.lower_bound_bits = bits;
      result.converged = true;
      return result;
    }
  }
  result.lower_bound_bits = cfg.max_probe_bits;
  result.converged = false;
  return result;
}

std::pair<int, int> resolve_bounds(const PrtResult& result, int static_baseline_bits) {
  if (!result.converged)
    throw ConfigError("prt: cannot resolve bounds from an unconverged probe run");
  if (result.lower_bound_bits > static_baseline_bits)
    throw ConfigError("prt: lower bound " + std::to_string(result.lower_bound_bits) +
                      " exceeds the static baseline width " +
                      std::to_string(static_baseline_bits) +
                      " (the model needs more bits than the target budget)");
  return {result.lower_bound_bits, static_baseline_bits};
}

ProbeRunner trainer_probe_runner(Trainer& trainer) {
  return [&trainer](int bits, int epochs) {
    std::vector<double> accs;
    for (int e = 0; e < epochs; ++e) {
      int t = trainer.next_epoch();
      trainer.run_epoch_at(bits, planned_bw_bits(trainer.options(), t),
                           planned_lr(trainer.options(), t));
      const std::vector<double>& batch = trainer.last_batch_accuracies();
      accs.insert(accs.end(), batch.begin(), batch.end());
    }
    return accs;
  };
}

std::string prt_result_to_json(const PrtResult& r) {
  nlohmann::ordered_json j;
  j["lower_bound_bits"] = r.lower_bound_bits;
  j["converged"] = r.converged;
  j["trace"] = nlohmann::ordered_json::array();
  for (const PrtProbe& p : r.trace) {
    nlohmann::ordered_json e;
    e["bits"] = p.bits;
    e["delta"] = p.delta;
    j["trace"].push_back(e);
  }
  return j.dump(2) + "\n";
}

std::string prt_trace_to_csv(const PrtResult& r) {
  std::string out = "bits,delta\n";
  for (const PrtProbe& p : r.trace)
    out += std::to_string(p.bits) + ',' + format_double(p.delta) + '\n';
  return out;
}

}  // namespace cpt
