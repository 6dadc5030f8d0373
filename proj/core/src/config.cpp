#include "cpt/config.hpp"

#include "cpt/errors.hpp"
#include "cpt/model.hpp"
#include "cpt/numerics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cpt {
namespace {

// Every key the tools understand. Unknown keys are rejected outright so
// a typo cannot silently fall back to a default.
constexpr std::array kKnownKeys = {
    "model.preset", "model.layers",
    "data.source", "data.train_count", "data.test_count", "data.seed", "data.noise",
    "data.dims", "data.classes", "data.separation", "data.gate_bits", "data.info_pairs",
    "data.nuisance", "data.train_images", "data.train_labels", "data.test_images",
    "data.test_labels", "data.train_csv", "data.test_csv",
    "train.epochs", "train.batch_size", "train.momentum", "train.weight_decay",
    "train.lr_boundaries", "train.lr_values", "train.cyclic_lr", "train.cyclic_lr_max",
    "train.cyclic_lr_min", "train.cyclic_lr_period", "train.seed", "train.checkpoint_every",
    "quant.fw_pattern", "quant.fw_min", "quant.fw_max", "quant.fw_cycles",
    "quant.per_iteration", "quant.cpt_start_epoch", "quant.bw_bits", "quant.gradient_cpt",
    "quant.bw_pattern", "quant.bw_min", "quant.bw_max", "quant.bw_cycles",
    "quant.weight_kind", "quant.input", "quant.input_signed",
    "prt.start_bits", "prt.max_bits", "prt.epochs_per_probe", "prt.window",
    "prt.threshold", "prt.baseline_bits", "prt.chain_train",
    "landscape.half_width", "landscape.grid_points", "landscape.fw_bits",
    "landscape.seed", "landscape.split", "landscape.batch_size",
    "sweep.patterns", "sweep.cycles", "sweep.bounds", "sweep.seeds",
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string::npos ? s.size() : comma;
    out.push_back(trim(s.substr(start, end - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string v = trim(text);
  T value{};
  const char* first = v.data();
  const char* last = v.data() + v.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last || v.empty())
    throw ConfigError(key + ": cannot parse '" + text + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string v = trim(text);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + text + "'");
}

}  // namespace

void KvConfig::set(const std::string& key, const std::string& value, const std::string& origin,
                   bool allow_replace) {
  if (key.empty()) throw ConfigError(origin + ": empty key");
  if (!allow_replace && values_.count(key) != 0)
    throw ConfigError(origin + ": duplicate key '" + key + "'");
  values_[key] = value;
}

KvConfig KvConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str(), path);
}

KvConfig KvConfig::from_string(const std::string& text, const std::string& origin) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where, false);
  }
  return cfg;
}

void KvConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment + "': expected key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)),
      "override '" + assignment + "'", true);
}

std::string KvConfig::get_string(const std::string& key, const std::string& def) const {
  const auto it = values_.find(key);
  return it == values_.end() ? def : it->second;
}

int KvConfig::get_int(const std::string& key, int def) const {
  const auto it = values_.find(key);
  return it == values_.end() ? def : parse_number<int>(key, it->second);
}

std::uint64_t KvConfig::get_uint64(const std::string& key, std::uint64_t def) const {
  const auto it = values_.find(key);
  return it == values_.end() ? def : parse_number<std::uint64_t>(key, it->second);
}

double KvConfig::get_double(const std::string& key, double def) const {
  const auto it = values_.find(key);
  return it == values_.end() ? def : parse_number<double>(key, it->second);
}

bool KvConfig::get_bool(const std::string& key, bool def) const {
  const auto it = values_.find(key);
  return it == values_.end() ? def : parse_bool(key, it->second);
}

std::vector<int> KvConfig::get_int_list(const std::string& key,
                                        const std::vector<int>& def) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  std::vector<int> out;
  for (const auto& item : split_list(it->second)) out.push_back(parse_number<int>(key, item));
  return out;
}

std::vector<double> KvConfig::get_double_list(const std::string& key,
                                              const std::vector<double>& def) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  std::vector<double> out;
  for (const auto& item : split_list(it->second)) out.push_back(parse_number<double>(key, item));
  return out;
}

std::string KvConfig::canonical_text() const {
  std::string out;  // std::map keeps keys sorted
  for (const auto& [k, v] : values_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

void KvConfig::check_known_keys() const {
  for (const auto& [k, v] : values_) {
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), k) == kKnownKeys.end())
      throw ConfigError("unknown config key '" + k + "'");
  }
}

namespace {

Dataset load_idx_pair(const KvConfig& cfg, const char* images_key, const char* labels_key) {
  const std::string images = cfg.get_string(images_key, "");
  const std::string labels = cfg.get_string(labels_key, "");
  if (images.empty() || labels.empty())
    throw ConfigError(std::string("data.source=idx requires ") + images_key + " and " +
                      labels_key);
  return load_idx(images, labels);
}

DataBundle split_bundle(Dataset whole, std::int64_t train_count, std::int64_t test_count) {
  DataBundle out;
  out.train = whole.subset(0, train_count);
  out.test = whole.subset(train_count, test_count);
  // Classes are a property of the generator, not of the slice.
  out.train.num_classes = whole.num_classes;
  out.test.num_classes = whole.num_classes;
  return out;
}

}  // namespace

DataBundle build_datasets(const KvConfig& cfg, const std::string& cache_dir) {
  const std::string source = cfg.get_string("data.source", "digits");
  const auto train_count = static_cast<std::int64_t>(cfg.get_int("data.train_count", 1600));
  const auto test_count = static_cast<std::int64_t>(cfg.get_int("data.test_count", 400));
  const std::uint64_t seed = cfg.get_uint64("data.seed", 12345);
  if (source != "idx" && source != "csv" && (train_count <= 0 || test_count <= 0))
    throw ConfigError("data.train_count and data.test_count must be positive");

  if (source == "idx") {
    DataBundle out;
    out.train = load_idx_pair(cfg, "data.train_images", "data.train_labels");
    out.test = load_idx_pair(cfg, "data.test_images", "data.test_labels");
    out.test.num_classes = std::max(out.test.num_classes, out.train.num_classes);
    return out;
  }
  if (source == "csv") {
    const std::string train_path = cfg.get_string("data.train_csv", "");
    const std::string test_path = cfg.get_string("data.test_csv", "");
    if (train_path.empty() || test_path.empty())
      throw ConfigError("data.source=csv requires data.train_csv and data.test_csv");
    DataBundle out;
    out.train = load_csv(train_path);
    out.test = load_csv(test_path);
    out.test.num_classes = std::max(out.test.num_classes, out.train.num_classes);
    return out;
  }

  Rng rng(seed);
  if (source == "digits") {
    const double noise = cfg.get_double("data.noise", 0.15);
    if (!cache_dir.empty()) {
      namespace fs = std::filesystem;
      const std::string stem = "digits16_n" + std::to_string(train_count + test_count) +
                               "_noise" + format_double(noise) + "_seed" + std::to_string(seed);
      const fs::path dir(cache_dir);
      const std::array<fs::path, 4> files = {
          dir / (stem + "_train-images.idx"), dir / (stem + "_train-labels.idx"),
          dir / (stem + "_test-images.idx"), dir / (stem + "_test-labels.idx")};
      const bool cached = std::all_of(files.begin(), files.end(),
                                      [](const fs::path& p) { return fs::exists(p); });
      if (cached) {
        DataBundle out;
        out.train = load_idx(files[0].string(), files[1].string());
        out.test = load_idx(files[2].string(), files[3].string());
        return out;
      }
      // Pixels are already u8-snapped, so the files reload bit-identically
      // and the first run may keep its in-memory copy.
      auto out = split_bundle(make_synthetic_digits(train_count + test_count, noise, rng),
                              train_count, test_count);
      fs::create_directories(dir);
      save_idx(files[0].string(), files[1].string(), out.train);
      save_idx(files[2].string(), files[3].string(), out.test);
      return out;
    }
    return split_bundle(make_synthetic_digits(train_count + test_count, noise, rng), train_count,
                        test_count);
  }
  if (source == "blobs") {
    const auto dims = static_cast<std::int64_t>(cfg.get_int("data.dims", 8));
    const auto classes = static_cast<std::int64_t>(cfg.get_int("data.classes", 2));
    const double separation = cfg.get_double("data.separation", 2.5);
    const double noise = cfg.get_double("data.noise", 0.5);
    return split_bundle(
        make_gaussian_blobs(train_count + test_count, dims, classes, separation, noise, rng),
        train_count, test_count);
  }
  if (source == "bit_gated") {
    const int gate_bits = cfg.get_int("data.gate_bits", 4);
    const int info_pairs = cfg.get_int("data.info_pairs", 3);
    const int nuisance = cfg.get_int("data.nuisance", 4);
    return split_bundle(
        make_bit_gated(train_count + test_count, gate_bits, info_pairs, nuisance, rng),
        train_count, test_count);
  }
  throw ConfigError("data.source: unknown source '" + source +
                    "' (expected digits, blobs, bit_gated, idx or csv)");
}

namespace {

PrecisionSchedule resolve_schedule(const KvConfig& cfg, const char* prefix, int epochs,
                                   int default_cycles) {
  const std::string p(prefix);
  PrecisionSchedule s;
  const std::string pattern_text = cfg.get_string(p + "_pattern", "cosine");
  try {
    s.pattern = parse_schedule_pattern(pattern_text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(p + "_pattern: " + e.what());
  }
  s.b_min = cfg.get_int(p + "_min", 3);
  s.b_max = cfg.get_int(p + "_max", 8);
  s.total_epochs = epochs;
  s.num_cycles = cfg.get_int(p + "_cycles", default_cycles);
  if (s.pattern == SchedulePattern::static_bits) {
    s.b_min = s.b_max;
    s.num_cycles = 1;
  }
  return s;
}

}  // namespace

TrainOptions resolve_train_options(const KvConfig& cfg, const Dataset& train_set) {
  TrainOptions opt;
  opt.input_shape = train_set.example_shape;
  opt.epochs = cfg.get_int("train.epochs", 40);
  opt.batch_size = cfg.get_int("train.batch_size", 50);
  opt.momentum = cfg.get_double("train.momentum", 0.9);
  opt.weight_decay = cfg.get_double("train.weight_decay", 5e-4);
  opt.seed = cfg.get_uint64("train.seed", 1);

  opt.fw = resolve_schedule(cfg, "quant.fw", opt.epochs, 8);
  opt.cpt_start_epoch = cfg.get_int("quant.cpt_start_epoch", 0);
  opt.per_iteration = cfg.get_bool("quant.per_iteration", false);
  opt.bw_bits = cfg.get_int("quant.bw_bits", 8);
  opt.gradient_cpt = cfg.get_bool("quant.gradient_cpt", false);
  if (opt.gradient_cpt)
    opt.bw = resolve_schedule(cfg, "quant.bw", opt.epochs, opt.fw.num_cycles);
  try {
    opt.weight_kind = parse_quant_kind(cfg.get_string("quant.weight_kind", "max_scale_signed"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("quant.weight_kind: ") + e.what());
  }
  opt.quantize_input = cfg.get_bool("quant.input", true);
  opt.input_signed = cfg.get_bool("quant.input_signed", true);

  opt.lr.boundaries = cfg.get_int_list("train.lr_boundaries", {opt.epochs});
  opt.lr.lrs = cfg.get_double_list("train.lr_values", {0.05});
  opt.use_cyclic_lr = cfg.get_bool("train.cyclic_lr", false);
  opt.cyclic_lr_max = cfg.get_double("train.cyclic_lr_max", 0.1);
  opt.cyclic_lr_min = cfg.get_double("train.cyclic_lr_min", 1e-3);
  opt.cyclic_lr_period =
      cfg.get_int("train.cyclic_lr_period", std::max(opt.fw.cycle_length(), 1));

  const std::string layers_text = cfg.get_string("model.layers", "");
  const std::int64_t classes = std::max<std::int64_t>(train_set.num_classes, 2);
  try {
    if (!layers_text.empty()) {
      opt.layers = parse_layer_list(layers_text);
    } else {
      std::string preset = cfg.get_string("model.preset", "auto");
      if (preset == "auto") {
        const bool is_16x16 = opt.input_shape == std::vector<std::int64_t>{1, 16, 16};
        preset = is_16x16 ? "cnn6" : "mlp3";
      }
      opt.layers = preset_layers(preset, opt.input_shape, classes);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }

  opt.validate(train_set.size());
  return opt;
}

PrtConfig resolve_prt_config(const KvConfig& cfg) {
  PrtConfig p;
  p.start_bits = cfg.get_int("prt.start_bits", p.start_bits);
  p.max_probe_bits = cfg.get_int("prt.max_bits", p.max_probe_bits);
  p.epochs_per_probe = cfg.get_int("prt.epochs_per_probe", p.epochs_per_probe);
  p.window = cfg.get_int("prt.window", p.window);
  p.threshold = cfg.get_double("prt.threshold", p.threshold);
  p.validate();
  return p;
}

}  // namespace cpt
