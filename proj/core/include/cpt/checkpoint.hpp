#pragma once

#include "cpt/train.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace cpt {

// FNV-1a, used to stamp checkpoints with the resolved config text so a
// resume under a different configuration is rejected.
std::uint64_t fnv1a64(std::string_view s);

// Checkpoint file layout (all integers and doubles little-endian):
//   magic "CPTCKPT1" (8 bytes)
//   u32 version (currently 1)
//   u64 config_hash
//   i32 next_epoch
//   u64 rng_state_len, then that many bytes of mt19937_64 text state
//   u32 tensor_count
//   shape table: per tensor u32 ndim, then ndim i64 dims
//   parameter payload: per tensor, size doubles
//   velocity payload: same shapes, size doubles
//   ledger: u64 x5 (forward, error_backprop, weight_grad, optimizer, steps)
//   u32 record_count, then per epoch record:
//     i32 epoch, i32 fw_bits, i32 bw_bits,
//     f64 lr, f64 train_loss, f64 train_acc, f64 test_acc,
//     u64 cum_total_bitops
void save_checkpoint(const std::string& path, const TrainerSnapshot& snap);

// Throws ConfigError on missing file, bad magic, unsupported version or
// truncation.
TrainerSnapshot load_checkpoint(const std::string& path);

}  // namespace cpt
