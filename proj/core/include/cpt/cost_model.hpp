#pragma once

#include <cstdint>
#include <vector>

namespace cpt {

// Bit-operation accounting. A multiply-accumulate between an a-bit and a
// b-bit operand costs a*b bit operations. For one training step over a
// layer with `macs` MACs at weight/activation/error widths b_w/b_a/b_e:
//   forward         macs * b_w * b_a
//   error backprop  macs * b_w * b_e
//   weight gradient macs * b_a * b_e
// The optimizer update (params * b_g^2 per step) is tracked separately
// and excluded from total_bitops(), since it is not a MAC pipeline cost.
// Evaluation-only forward passes are not accounted.
struct CostLedger {
  std::uint64_t forward_bitops = 0;
  std::uint64_t error_backprop_bitops = 0;
  std::uint64_t weight_grad_bitops = 0;
  std::uint64_t optimizer_bitops = 0;
  std::uint64_t steps = 0;  // optimizer steps covered by this ledger

  std::uint64_t total_bitops() const {
    return forward_bitops + error_backprop_bitops + weight_grad_bitops;
  }

  void add_training_macs(std::uint64_t macs, int b_w, int b_a, int b_e);
  void add_optimizer_update(std::uint64_t params, int b_g);

  bool operator==(const CostLedger&) const = default;
};

// MAC counts. Output spatial dims use floor((dim + 2*pad - k)/stride)+1.
std::uint64_t conv2d_macs(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w,
                          std::int64_t f, int kh, int kw, int stride, int pad);
std::uint64_t linear_macs(std::int64_t n, std::int64_t in, std::int64_t out);

// One epoch entry of a resolved training plan.
struct PlannedEpoch {
  int fw_bits = 8;  // weights and activations
  int bw_bits = 8;  // errors and gradients
};

// Analytic cost of a full training run: per-sample MACs scale linearly
// with batch size, so the whole schedule can be enumerated without
// running it. Batches per epoch: full batches of batch_size plus one
// final partial batch when train_size % batch_size != 0. Must match an
// instrumented run's ledger exactly.
CostLedger enumerate_training_cost(std::uint64_t macs_per_sample, std::uint64_t param_count,
                                   std::int64_t train_size, std::int64_t batch_size,
                                   const std::vector<PlannedEpoch>& plan);

// Relative savings of `ours` against `baseline`, in percent (positive
// means cheaper). Throws std::invalid_argument when the ledgers cover a
// different number of optimizer steps, since the comparison is then
// meaningless.
struct CostComparison {
  double forward_pct = 0.0;
  double error_backprop_pct = 0.0;
  double weight_grad_pct = 0.0;
  double total_pct = 0.0;
  double optimizer_pct = 0.0;
};
CostComparison compare_costs(const CostLedger& baseline, const CostLedger& ours);

}  // namespace cpt
