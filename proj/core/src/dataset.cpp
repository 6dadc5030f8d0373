#include "cpt/dataset.hpp"

#include "cpt/errors.hpp"
#include "cpt/numerics.hpp"
#include "cpt/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cpt {

void Dataset::validate() const {
  std::int64_t es = example_size();
  if (es < 1) throw std::invalid_argument("dataset: example shape must be non-empty");
  if (static_cast<std::int64_t>(inputs.size()) != size() * es)
    throw std::invalid_argument("dataset: input buffer does not match size * example_size");
  if (num_classes < 1) throw std::invalid_argument("dataset: num_classes must be >= 1");
  for (std::int64_t y : labels)
    if (y < 0 || y >= num_classes) throw std::invalid_argument("dataset: label out of range");
}

Tensor Dataset::batch_inputs(std::span<const std::int64_t> idx) const {
  std::int64_t es = example_size();
  std::vector<std::int64_t> shape;
  shape.push_back(static_cast<std::int64_t>(idx.size()));
  shape.insert(shape.end(), example_shape.begin(), example_shape.end());
  Tensor out(shape);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    std::int64_t i = idx[b];
    if (i < 0 || i >= size()) throw std::out_of_range("dataset: batch index out of range");
    std::copy_n(inputs.data() + i * es, es, out.data() + static_cast<std::int64_t>(b) * es);
  }
  return out;
}

std::vector<std::int64_t> Dataset::batch_labels(std::span<const std::int64_t> idx) const {
  std::vector<std::int64_t> out;
  out.reserve(idx.size());
  for (std::int64_t i : idx) {
    if (i < 0 || i >= size()) throw std::out_of_range("dataset: batch index out of range");
    out.push_back(labels[static_cast<std::size_t>(i)]);
  }
  return out;
}

Dataset Dataset::subset(std::int64_t begin, std::int64_t count) const {
  if (begin < 0 || count < 0 || begin + count > size())
    throw std::out_of_range("dataset: subset range out of bounds");
  Dataset out;
  out.example_shape = example_shape;
  out.num_classes = num_classes;
  std::int64_t es = example_size();
  out.inputs.assign(inputs.begin() + begin * es, inputs.begin() + (begin + count) * es);
  out.labels.assign(labels.begin() + begin, labels.begin() + begin + count);
  return out;
}

namespace {

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw ConfigError(path + ": truncated IDX header");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw ConfigError(images_path + ": cannot open");
  std::uint32_t magic = read_u32_be(img, images_path);
  if (magic != kIdxImagesMagic) throw ConfigError(images_path + ": malformed magic (expected IDX images)");
  std::uint32_t n = read_u32_be(img, images_path);
  std::uint32_t rows = read_u32_be(img, images_path);
  std::uint32_t cols = read_u32_be(img, images_path);
  std::vector<unsigned char> pixels(static_cast<std::size_t>(n) * rows * cols);
  img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!img) throw ConfigError(images_path + ": truncated pixel data");

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw ConfigError(labels_path + ": cannot open");
  std::uint32_t lmagic = read_u32_be(lab, labels_path);
  if (lmagic != kIdxLabelsMagic) throw ConfigError(labels_path + ": malformed magic (expected IDX labels)");
  std::uint32_t ln = read_u32_be(lab, labels_path);
  if (ln != n)
    throw ConfigError(labels_path + ": label count " + std::to_string(ln) +
                      " does not match image count " + std::to_string(n));
  std::vector<unsigned char> raw_labels(ln);
  lab.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(raw_labels.size()));
  if (!lab) throw ConfigError(labels_path + ": truncated label data");

  Dataset ds;
  ds.example_shape = {1, static_cast<std::int64_t>(rows), static_cast<std::int64_t>(cols)};
  ds.inputs.resize(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) ds.inputs[i] = pixels[i] / 255.0;
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  std::int64_t max_label = 0;
  for (std::int64_t y : ds.labels) max_label = std::max(max_label, y);
  ds.num_classes = max_label + 1;
  ds.validate();
  return ds;
}

void save_idx(const std::string& images_path, const std::string& labels_path, const Dataset& ds) {
  ds.validate();
  if (ds.example_shape.size() != 3 || ds.example_shape[0] != 1)
    throw std::invalid_argument("save_idx: requires [1, H, W] examples");
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw ConfigError(images_path + ": cannot open for writing");
  write_u32_be(img, kIdxImagesMagic);
  write_u32_be(img, static_cast<std::uint32_t>(ds.size()));
  write_u32_be(img, static_cast<std::uint32_t>(ds.example_shape[1]));
  write_u32_be(img, static_cast<std::uint32_t>(ds.example_shape[2]));
  for (double v : ds.inputs) {
    double q = round_half_even(v * 255.0);
    q = std::min(std::max(q, 0.0), 255.0);
    unsigned char b = static_cast<unsigned char>(q);
    img.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!img) throw ConfigError(images_path + ": write failed");

  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw ConfigError(labels_path + ": cannot open for writing");
  write_u32_be(lab, kIdxLabelsMagic);
  write_u32_be(lab, static_cast<std::uint32_t>(ds.size()));
  for (std::int64_t y : ds.labels) {
    unsigned char b = static_cast<unsigned char>(y);
    lab.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!lab) throw ConfigError(labels_path + ": write failed");
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  Dataset ds;
  std::string line;
  std::int64_t width = -1;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        fields.push_back(std::stod(cell, &pos));
        if (pos != cell.size() && cell.find_first_not_of(" \t\r", pos) != std::string::npos)
          throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": non-numeric field '" + cell + "'");
      }
    }
    if (fields.size() < 2)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": need a label and at least one feature");
    if (width < 0) width = static_cast<std::int64_t>(fields.size()) - 1;
    if (static_cast<std::int64_t>(fields.size()) - 1 != width)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": row length mismatch");
    double label = fields[0];
    if (label < 0.0 || label != std::floor(label))
      throw ConfigError(path + ":" + std::to_string(line_no) + ": label must be a non-negative integer");
    ds.labels.push_back(static_cast<std::int64_t>(label));
    ds.inputs.insert(ds.inputs.end(), fields.begin() + 1, fields.end());
  }
  if (ds.labels.empty()) throw ConfigError(path + ": no data rows");
  ds.example_shape = {width};
  std::int64_t max_label = 0;
  for (std::int64_t y : ds.labels) max_label = std::max(max_label, y);
  ds.num_classes = max_label + 1;
  ds.validate();
  return ds;
}

Dataset make_gaussian_blobs(std::int64_t n, std::int64_t dims, std::int64_t classes,
                            double separation, double noise, Rng& rng) {
  if (n < 1 || dims < 1 || classes < 2)
    throw std::invalid_argument("make_gaussian_blobs: requires n >= 1, dims >= 1, classes >= 2");
  std::vector<std::vector<double>> means(static_cast<std::size_t>(classes));
  for (auto& m : means) {
    m.resize(static_cast<std::size_t>(dims));
    double norm = 0.0;
    for (double& v : m) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) norm = 1.0;
    for (double& v : m) v *= separation / norm;
  }
  Dataset ds;
  ds.example_shape = {dims};
  ds.num_classes = classes;
  ds.inputs.reserve(static_cast<std::size_t>(n * dims));
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t c = i % classes;
    ds.labels.push_back(c);
    const auto& m = means[static_cast<std::size_t>(c)];
    for (std::int64_t d = 0; d < dims; ++d)
      ds.inputs.push_back(m[static_cast<std::size_t>(d)] + noise * rng.normal());
  }
  ds.validate();
  return ds;
}

std::vector<std::pair<int, int>> bit_gate_pairs(int gate_bits) {
  if (gate_bits < 3 || gate_bits > 8)
    throw std::invalid_argument("bit_gate_pairs: gate_bits must be in [3, 8]");
  int denom = (1 << gate_bits) - 1;
  // Quantized value of v at width b under the unsigned max-scale
  // quantizer with the per-tensor max pinned to 1.0 by an anchor.
  auto q = [](double v, int b) {
    Tensor t = Tensor::from_data({2}, {v, 1.0});
    return quantize_max_scale(t, b, false)[0];
  };
  std::vector<std::pair<int, int>> out;
  for (int j = 1; j + 1 < denom; ++j) {
    double lo = static_cast<double>(j) / denom;
    double hi = static_cast<double>(j + 1) / denom;
    bool ok = true;
    for (int b = 2; b < gate_bits && ok; ++b) ok = q(lo, b) == q(hi, b);
    for (int b = gate_bits; b <= 8 && ok; ++b) ok = q(lo, b) != q(hi, b);
    if (ok) out.emplace_back(j, j + 1);
  }
  return out;
}

Dataset make_bit_gated(std::int64_t n, int gate_bits, int info_pairs, int nuisance, Rng& rng) {
  if (n < 1 || info_pairs < 1 || nuisance < 0)
    throw std::invalid_argument("make_bit_gated: requires n >= 1, info_pairs >= 1, nuisance >= 0");
  auto pairs = bit_gate_pairs(gate_bits);
  if (static_cast<int>(pairs.size()) < info_pairs)
    throw std::invalid_argument("make_bit_gated: only " + std::to_string(pairs.size()) +
                                " gate pairs exist at " + std::to_string(gate_bits) + " bits");
  // Spread the chosen pairs across the available ones.
  std::vector<std::pair<int, int>> chosen;
  for (int i = 0; i < info_pairs; ++i) {
    std::size_t idx = info_pairs == 1
                          ? pairs.size() / 2
                          : static_cast<std::size_t>(round_half_even_rational(
                                static_cast<std::int64_t>(i) *
                                    static_cast<std::int64_t>(pairs.size() - 1),
                                info_pairs - 1));
    chosen.push_back(pairs[idx]);
  }
  double denom = static_cast<double>((1 << gate_bits) - 1);
  std::int64_t dims = 1 + info_pairs + nuisance;
  Dataset ds;
  ds.example_shape = {dims};
  ds.num_classes = 2;
  ds.inputs.reserve(static_cast<std::size_t>(n * dims));
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t c = i % 2;
    ds.labels.push_back(c);
    ds.inputs.push_back(1.0);  // anchor
    for (const auto& [lo, hi] : chosen) ds.inputs.push_back((c == 0 ? lo : hi) / denom);
    for (int d = 0; d < nuisance; ++d) ds.inputs.push_back(rng.uniform(0.0, 0.95));
  }
  ds.validate();
  return ds;
}

namespace {

// Seven-segment layout in a 10x14 box: A top, G middle, D bottom bars;
// F/B upper left/right, E/C lower left/right posts. Bars are 2 px thick.
const char* kSegmentsByDigit[10] = {
    "ABCDEF", "BC", "ABGED", "ABGCD", "FGBC", "AFGCD", "AFGECD", "ABC", "ABCDEFG", "ABCDFG",
};

bool segment_covers(char seg, int x, int y) {
  switch (seg) {
    case 'A': return y < 2;
    case 'D': return y >= 12;
    case 'G': return y >= 6 && y < 8;
    case 'F': return x < 2 && y < 7;
    case 'B': return x >= 8 && y < 7;
    case 'E': return x < 2 && y >= 7;
    case 'C': return x >= 8 && y >= 7;
    default: return false;
  }
}

}  // namespace

Dataset make_synthetic_digits(std::int64_t n, double noise, Rng& rng) {
  if (n < 1) throw std::invalid_argument("make_synthetic_digits: requires n >= 1");
  if (noise < 0.0) throw std::invalid_argument("make_synthetic_digits: noise must be >= 0");
  const int S = 16;
  Dataset ds;
  ds.example_shape = {1, S, S};
  ds.num_classes = 10;
  ds.inputs.resize(static_cast<std::size_t>(n) * S * S, 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t digit = i % 10;
    ds.labels.push_back(digit);
    int ox = 3 + static_cast<int>(rng.uniform_int(5)) - 2;  // [1, 5]
    int oy = 1 + static_cast<int>(rng.uniform_int(3)) - 1;  // [0, 2]
    double intensity = rng.uniform(0.7, 1.0);
    double* img = ds.inputs.data() + i * S * S;
    const char* segs = kSegmentsByDigit[digit];
    for (int y = 0; y < 14; ++y)
      for (int x = 0; x < 10; ++x) {
        bool on = false;
        for (const char* s = segs; *s && !on; ++s) on = segment_covers(*s, x, y);
        if (on) img[(oy + y) * S + (ox + x)] = intensity;
      }
    for (int p = 0; p < S * S; ++p) {
      double v = img[p] + (noise > 0.0 ? noise * rng.normal() : 0.0);
      v = std::min(std::max(v, 0.0), 1.0);
      // Snap to the uint8 grid so IDX caching reproduces these values.
      img[p] = round_half_even(v * 255.0) / 255.0;
    }
  }
  ds.validate();
  return ds;
}

}  // namespace cpt
