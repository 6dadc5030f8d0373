#pragma once

#include "cpt/dataset.hpp"
#include "cpt/prt.hpp"
#include "cpt/train.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cpt {

// Flat dotted-key configuration. Files hold one `key = value` per line,
// `#` starts a comment, blank lines are ignored. Duplicate keys in one
// file are an error; overrides replace file values. Key lookup is typed
// and every malformed value names its key in the ConfigError.
class KvConfig {
 public:
  KvConfig() = default;
  static KvConfig from_file(const std::string& path);
  static KvConfig from_string(const std::string& text, const std::string& origin = "<string>");

  // "dotted.key=value" (no spaces required around '=').
  void apply_override(const std::string& assignment);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& def) const;
  int get_int(const std::string& key, int def) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t def) const;
  double get_double(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;  // true/false/1/0
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& def) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& def) const;

  // Sorted `key=value` lines; hashing this pins a run's identity.
  std::string canonical_text() const;

  // Rejects any key outside the documented schema.
  void check_known_keys() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  void set(const std::string& key, const std::string& value, const std::string& origin,
           bool allow_replace);
  std::map<std::string, std::string> values_;
};

struct DataBundle {
  Dataset train;
  Dataset test;
};

// Materializes the configured dataset pair. Synthetic sources generate
// train and test from one stream seeded by data.seed; the digits source
// caches itself as IDX files under cache_dir (when non-empty) and later
// runs load the cache, which is byte-equivalent by construction.
DataBundle build_datasets(const KvConfig& cfg, const std::string& cache_dir);

TrainOptions resolve_train_options(const KvConfig& cfg, const Dataset& train_set);

PrtConfig resolve_prt_config(const KvConfig& cfg);

}  // namespace cpt
