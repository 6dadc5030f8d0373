#pragma once

#include "cpt/cost_model.hpp"
#include "cpt/dataset.hpp"
#include "cpt/model.hpp"
#include "cpt/rng.hpp"
#include "cpt/schedule.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cpt {

struct EpochRecord {
  int epoch = 0;
  int fw_bits = 32;
  int bw_bits = 32;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;  // percent
  double test_acc = 0.0;   // percent
  std::uint64_t cum_total_bitops = 0;

  bool operator==(const EpochRecord&) const = default;
};

struct MetricsLog {
  std::vector<EpochRecord> records;

  std::string to_csv() const;
  std::string to_jsonl() const;

  bool operator==(const MetricsLog&) const = default;
};

struct TrainOptions {
  std::vector<LayerSpec> layers;
  std::vector<std::int64_t> input_shape;

  int epochs = 40;
  int batch_size = 50;
  double momentum = 0.9;
  double weight_decay = 5e-4;

  LrSchedule lr;  // staircase; boundaries.back() must equal epochs
  bool use_cyclic_lr = false;
  double cyclic_lr_max = 0.1;
  double cyclic_lr_min = 1e-3;
  int cyclic_lr_period = 5;

  // Forward precision (weights and activations). A fixed-precision run
  // is a static_bits schedule with b_max = that width.
  PrecisionSchedule fw;
  // Epochs before this index train at fw.b_min; from it on, the cyclic
  // schedule applies, still indexed by the global epoch number.
  int cpt_start_epoch = 0;
  // Evaluate the forward schedule at fractional positions within each
  // epoch instead of holding it constant across the epoch.
  bool per_iteration = false;

  // Backward precision (errors and gradients): a static width, or its
  // own cyclic schedule when gradient_cpt is set.
  int bw_bits = 8;
  bool gradient_cpt = false;
  PrecisionSchedule bw;

  // Max-scale keeps the weight magnitude, which matters in a model
  // family without normalization layers; dorefa renormalizes to [-1, 1]
  // and needs an architecture built for that.
  QuantKind weight_kind = QuantKind::max_scale_signed;
  bool quantize_input = true;
  bool input_signed = true;

  std::uint64_t seed = 1;

  void validate(std::int64_t train_size) const;  // throws ConfigError
};

// Resolved plan entry for one epoch (per-epoch mode; with per_iteration
// the forward bits may additionally vary across steps inside an epoch).
struct EpochPlan {
  int epoch = 0;
  int fw_bits = 32;
  int bw_bits = 32;
  double lr = 0.0;
};

// The plan for a single epoch. Forward bits honor the cpt_start_epoch
// clamp (b_min before it, the schedule at the global epoch after).
int planned_fw_bits(const TrainOptions& opt, int epoch);
int planned_bw_bits(const TrainOptions& opt, int epoch);
double planned_lr(const TrainOptions& opt, int epoch);

std::vector<EpochPlan> build_epoch_plan(const TrainOptions& opt);

// Analytic BitOPs for the whole run described by `opt`, including the
// per_iteration refinement. Matches an instrumented Trainer ledger
// exactly: same bits source, same batch partitioning, same MAC counts.
CostLedger enumerate_cost(const TrainOptions& opt, std::uint64_t macs_per_sample,
                          std::uint64_t param_count, std::int64_t train_size);

// Complete state of a paused run.
struct TrainerSnapshot {
  std::uint64_t config_hash = 0;
  std::int32_t next_epoch = 0;
  std::string rng_state;
  std::vector<Tensor> params;
  std::vector<Tensor> velocities;
  CostLedger ledger;
  MetricsLog metrics;
};

struct RunHooks {
  // Called after each completed epoch with its record just appended.
  std::function<void(const class Trainer&, const EpochRecord&)> after_epoch;
};

// Single-threaded quantized training loop. One Rng (seeded from
// TrainOptions::seed) drives parameter init, batch shuffling and
// stochastic rounding, so a (config, seed) pair fixes the entire run.
class Trainer {
 public:
  Trainer(TrainOptions opt, Dataset train_set, Dataset test_set);

  const TrainOptions& options() const { return opt_; }
  Model& model() { return model_; }
  const Model& model() const { return model_; }
  const MetricsLog& metrics() const { return metrics_; }
  const CostLedger& ledger() const { return ledger_; }
  int next_epoch() const { return next_epoch_; }

  // Runs one epoch of the configured plan: shuffle, quantized forward,
  // backward, gradient quantization, SGD. Detects divergence and throws
  // NanAbortError; the snapshot of the last completed epoch stays
  // available through last_good_snapshot().
  const EpochRecord& run_epoch();

  // Same loop at explicitly forced widths and lr, off-plan (probe use).
  const EpochRecord& run_epoch_at(int fw_bits, int bw_bits, double lr);

  // Per-iteration training-batch accuracies (percent) of the most
  // recent epoch, in step order.
  const std::vector<double>& last_batch_accuracies() const { return batch_accs_; }

  // Runs all remaining epochs of the plan.
  void run(const RunHooks* hooks = nullptr);

  // Top-1 accuracy (percent) at the given forward width. Deterministic;
  // consumes no randomness and adds nothing to the ledger.
  double evaluate(const Dataset& ds, int fw_bits) const;

  TrainerSnapshot snapshot() const;
  void restore(const TrainerSnapshot& snap);
  const TrainerSnapshot& last_good_snapshot() const { return last_good_; }

 private:
  const EpochRecord& epoch_impl(std::optional<EpochPlan> forced);

  TrainOptions opt_;
  Dataset train_;
  Dataset test_;
  Model model_;
  std::vector<Tensor> velocities_;
  Rng rng_;
  CostLedger ledger_;
  MetricsLog metrics_;
  std::vector<double> batch_accs_;
  int next_epoch_ = 0;
  TrainerSnapshot last_good_;
};

// Predicted class per row of a [N, C] logits tensor (ties break low).
std::vector<std::int64_t> argmax_rows(const Tensor& logits);

// Three-stage protocol probing how early low precision interacts with
// the early learning rate: stage 1 trains at (stage1_bits, stage1_lr)
// for the first half of the epochs, stages 2 and 3 run full precision
// at lr 0.01 and 0.001 over the next two quarters. Returns final test
// accuracy (percent).
double run_three_stage_protocol(const TrainOptions& base, const Dataset& train_set,
                                const Dataset& test_set, int stage1_bits, double stage1_lr);

}  // namespace cpt
