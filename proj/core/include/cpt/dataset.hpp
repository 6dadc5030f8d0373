#pragma once

#include "cpt/rng.hpp"
#include "cpt/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cpt {

// In-memory labelled dataset. Inputs are stored flat, one example of
// example_shape after another, values already normalized for training.
struct Dataset {
  std::vector<std::int64_t> example_shape;
  std::vector<double> inputs;
  std::vector<std::int64_t> labels;
  std::int64_t num_classes = 0;

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  std::int64_t example_size() const { return shape_product(example_shape); }
  // Throws std::invalid_argument on any internal inconsistency.
  void validate() const;

  // Gathers examples into a batch tensor [B, example_shape...].
  Tensor batch_inputs(std::span<const std::int64_t> idx) const;
  std::vector<std::int64_t> batch_labels(std::span<const std::int64_t> idx) const;

  Dataset subset(std::int64_t begin, std::int64_t count) const;
};

// IDX image/label pair (the classic big-endian format: image files carry
// magic 0x00000803 and dims [n, rows, cols] of uint8 pixels, label files
// magic 0x00000801 and n uint8 labels). Pixels load as value/255 with
// example shape [1, rows, cols]; num_classes becomes max label + 1.
// Malformed files raise ConfigError naming the path and the defect.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Writes an IDX pair. Requires a [1, H, W] example shape and values in
// [0, 1]; pixels are stored as round-half-even(v * 255).
void save_idx(const std::string& images_path, const std::string& labels_path, const Dataset& ds);

// Plain numeric CSV, one example per line: label,feature,feature,...
// No header. Rejects ragged rows, non-numeric fields and negative or
// non-integral labels; num_classes becomes max label + 1.
Dataset load_csv(const std::string& path);

// Isotropic Gaussian clusters, one per class, means drawn on a sphere of
// radius `separation`. Labels cycle 0..classes-1 so any prefix slice is
// near-balanced.
Dataset make_gaussian_blobs(std::int64_t n, std::int64_t dims, std::int64_t classes,
                            double separation, double noise, Rng& rng);

// Adjacent value pairs (j, j+1) on the (2^gate_bits - 1)-step unit grid
// that the unsigned max-scale quantizer maps to one value at every width
// in [2, gate_bits) and keeps distinct at every width in [gate_bits, 8].
// Computed by running the actual quantizer, so the returned pairs track
// its floating-point behaviour exactly.
std::vector<std::pair<int, int>> bit_gate_pairs(int gate_bits);

// Binary classification set whose signal survives quantization only at
// gate_bits or more: feature 0 is a constant 1.0 anchor pinning the
// per-tensor scale, features 1..info_pairs carry one gate pair each
// (class 0 takes the low value, class 1 the high), and the remaining
// `nuisance` features are label-independent uniform noise below 1.
Dataset make_bit_gated(std::int64_t n, int gate_bits, int info_pairs, int nuisance, Rng& rng);

// 16x16 seven-segment digit renderings with per-example position jitter
// (+-2 px horizontal, +-1 px vertical), random stroke intensity in
// [0.7, 1], and Gaussian pixel noise of the given stddev, clamped to
// [0, 1]. Pixels are snapped to the uint8 grid so an IDX round trip is
// lossless. Labels cycle 0..9.
Dataset make_synthetic_digits(std::int64_t n, double noise, Rng& rng);

}  // namespace cpt
