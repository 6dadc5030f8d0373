#include "cpt/cost_model.hpp"

#include <stdexcept>
#include <string>

namespace cpt {

namespace {

void check_width(int bits, const char* what) {
  if (bits < 2 || bits > 32)
    throw std::invalid_argument(std::string(what) + " width must be in [2, 32], got " +
                                std::to_string(bits));
}

double pct_saved(std::uint64_t baseline, std::uint64_t ours) {
  if (baseline == 0) return 0.0;
  return 100.0 * (1.0 - static_cast<double>(ours) / static_cast<double>(baseline));
}

}  // namespace

void CostLedger::add_training_macs(std::uint64_t macs, int b_w, int b_a, int b_e) {
  check_width(b_w, "weight");
  check_width(b_a, "activation");
  check_width(b_e, "error");
  forward_bitops += macs * static_cast<std::uint64_t>(b_w) * static_cast<std::uint64_t>(b_a);
  error_backprop_bitops += macs * static_cast<std::uint64_t>(b_w) * static_cast<std::uint64_t>(b_e);
  weight_grad_bitops += macs * static_cast<std::uint64_t>(b_a) * static_cast<std::uint64_t>(b_e);
}

void CostLedger::add_optimizer_update(std::uint64_t params, int b_g) {
  check_width(b_g, "gradient");
  optimizer_bitops += params * static_cast<std::uint64_t>(b_g) * static_cast<std::uint64_t>(b_g);
  steps += 1;
}

std::uint64_t conv2d_macs(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w,
                          std::int64_t f, int kh, int kw, int stride, int pad) {
  if (n < 1 || c < 1 || h < 1 || w < 1 || f < 1 || kh < 1 || kw < 1 || stride < 1 || pad < 0)
    throw std::invalid_argument("conv2d_macs: invalid geometry");
  std::int64_t oh = (h + 2 * pad - kh) / stride + 1;
  std::int64_t ow = (w + 2 * pad - kw) / stride + 1;
  if (h + 2 * pad < kh || w + 2 * pad < kw || oh < 1 || ow < 1)
    throw std::invalid_argument("conv2d_macs: kernel larger than padded input");
  return static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(f) *
         static_cast<std::uint64_t>(c) * static_cast<std::uint64_t>(kh) *
         static_cast<std::uint64_t>(kw) * static_cast<std::uint64_t>(oh) *
         static_cast<std::uint64_t>(ow);
}

std::uint64_t linear_macs(std::int64_t n, std::int64_t in, std::int64_t out) {
  if (n < 1 || in < 1 || out < 1) throw std::invalid_argument("linear_macs: invalid geometry");
  return static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(in) *
         static_cast<std::uint64_t>(out);
}

CostLedger enumerate_training_cost(std::uint64_t macs_per_sample, std::uint64_t param_count,
                                   std::int64_t train_size, std::int64_t batch_size,
                                   const std::vector<PlannedEpoch>& plan) {
  if (train_size < 1 || batch_size < 1)
    throw std::invalid_argument("enumerate_training_cost: train_size and batch_size must be >= 1");
  std::int64_t full = train_size / batch_size;
  std::int64_t rem = train_size % batch_size;
  CostLedger ledger;
  for (const PlannedEpoch& e : plan) {
    for (std::int64_t b = 0; b < full + (rem ? 1 : 0); ++b) {
      std::uint64_t n = static_cast<std::uint64_t>(b < full ? batch_size : rem);
      ledger.add_training_macs(macs_per_sample * n, e.fw_bits, e.fw_bits, e.bw_bits);
      ledger.add_optimizer_update(param_count, e.bw_bits);
    }
  }
  return ledger;
}

CostComparison compare_costs(const CostLedger& baseline, const CostLedger& ours) {
  if (baseline.steps != ours.steps)
    throw std::invalid_argument("compare_costs: ledgers cover different step counts (" +
                                std::to_string(baseline.steps) + " vs " +
                                std::to_string(ours.steps) + ")");
  CostComparison c;
  c.forward_pct = pct_saved(baseline.forward_bitops, ours.forward_bitops);
  c.error_backprop_pct = pct_saved(baseline.error_backprop_bitops, ours.error_backprop_bitops);
  c.weight_grad_pct = pct_saved(baseline.weight_grad_bitops, ours.weight_grad_bitops);
  c.total_pct = pct_saved(baseline.total_bitops(), ours.total_bitops());
  c.optimizer_pct = pct_saved(baseline.optimizer_bitops, ours.optimizer_bitops);
  return c;
}

}  // namespace cpt
