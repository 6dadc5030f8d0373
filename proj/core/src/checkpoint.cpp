#include "cpt/checkpoint.hpp"

#include "cpt/errors.hpp"

#include <cstring>
#include <fstream>

namespace cpt {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

constexpr char kMagic[8] = {'C', 'P', 'T', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw ConfigError(path + ": cannot open for writing");
  }
  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u32(std::uint32_t v) { uint_le(v, 4); }
  void u64(std::uint64_t v) { uint_le(v, 8); }
  void i32(std::int32_t v) { uint_le(static_cast<std::uint32_t>(v), 4); }
  void i64(std::int64_t v) { uint_le(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void finish() {
    out_.flush();
    if (!out_) throw ConfigError(path_ + ": write failed");
  }

 private:
  void uint_le(std::uint64_t v, int n) {
    unsigned char b[8];
    for (int i = 0; i < n; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, static_cast<std::size_t>(n));
  }
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw ConfigError(path + ": cannot open");
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw ConfigError(path_ + ": truncated checkpoint");
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint_le(4)); }
  std::uint64_t u64() { return uint_le(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

 private:
  std::uint64_t uint_le(int n) {
    unsigned char b[8];
    bytes(b, static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::ifstream in_;
  std::string path_;
};

void write_payload(Writer& w, const std::vector<Tensor>& tensors) {
  for (const Tensor& t : tensors)
    for (std::int64_t i = 0; i < t.size(); ++i) w.f64(t[i]);
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainerSnapshot& snap) {
  Writer w(path);
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  w.u64(snap.config_hash);
  w.i32(snap.next_epoch);
  w.u64(snap.rng_state.size());
  w.bytes(snap.rng_state.data(), snap.rng_state.size());
  if (snap.velocities.size() != snap.params.size())
    throw std::invalid_argument("save_checkpoint: params/velocities tensor count mismatch");
  w.u32(static_cast<std::uint32_t>(snap.params.size()));
  for (const Tensor& t : snap.params) {
    w.u32(static_cast<std::uint32_t>(t.ndim()));
    for (int d = 0; d < t.ndim(); ++d) w.i64(t.dim(d));
  }
  write_payload(w, snap.params);
  write_payload(w, snap.velocities);
  w.u64(snap.ledger.forward_bitops);
  w.u64(snap.ledger.error_backprop_bitops);
  w.u64(snap.ledger.weight_grad_bitops);
  w.u64(snap.ledger.optimizer_bitops);
  w.u64(snap.ledger.steps);
  w.u32(static_cast<std::uint32_t>(snap.metrics.records.size()));
  for (const EpochRecord& r : snap.metrics.records) {
    w.i32(r.epoch);
    w.i32(r.fw_bits);
    w.i32(r.bw_bits);
    w.f64(r.lr);
    w.f64(r.train_loss);
    w.f64(r.train_acc);
    w.f64(r.test_acc);
    w.u64(r.cum_total_bitops);
  }
  w.finish();
}

TrainerSnapshot load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ConfigError(path + ": bad checkpoint magic");
  std::uint32_t version = r.u32();
  if (version != kVersion)
    throw ConfigError(path + ": unsupported checkpoint version " + std::to_string(version));
  TrainerSnapshot snap;
  snap.config_hash = r.u64();
  snap.next_epoch = r.i32();
  std::uint64_t rng_len = r.u64();
  if (rng_len > (1u << 20)) throw ConfigError(path + ": implausible RNG state length");
  snap.rng_state.resize(rng_len);
  if (rng_len) r.bytes(snap.rng_state.data(), rng_len);
  std::uint32_t count = r.u32();
  std::vector<std::vector<std::int64_t>> shapes(count);
  for (auto& shape : shapes) {
    std::uint32_t ndim = r.u32();
    if (ndim > 8) throw ConfigError(path + ": implausible tensor rank");
    shape.resize(ndim);
    for (auto& d : shape) {
      d = r.i64();
      if (d < 0 || d > (1ll << 32)) throw ConfigError(path + ": implausible tensor dimension");
    }
  }
  auto read_payload = [&](std::vector<Tensor>& out) {
    out.clear();
    for (const auto& shape : shapes) {
      Tensor t(shape);
      for (std::int64_t i = 0; i < t.size(); ++i) t[i] = r.f64();
      out.push_back(std::move(t));
    }
  };
  read_payload(snap.params);
  read_payload(snap.velocities);
  snap.ledger.forward_bitops = r.u64();
  snap.ledger.error_backprop_bitops = r.u64();
  snap.ledger.weight_grad_bitops = r.u64();
  snap.ledger.optimizer_bitops = r.u64();
  snap.ledger.steps = r.u64();
  std::uint32_t records = r.u32();
  snap.metrics.records.resize(records);
  for (EpochRecord& rec : snap.metrics.records) {
    rec.epoch = r.i32();
    rec.fw_bits = r.i32();
    rec.bw_bits = r.i32();
    rec.lr = r.f64();
    rec.train_loss = r.f64();
    rec.train_acc = r.f64();
    rec.test_acc = r.f64();
    rec.cum_total_bitops = r.u64();
  }
  return snap;
}

}  // namespace cpt
