#include "cpt/config.hpp"

#include "cpt/errors.hpp"
#include "cpt/model.hpp"

#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace cpt;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() /
                 ("cpt_config_test_" + std::to_string(static_cast<long>(::getpid())));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

}  // namespace

TEST_CASE("kv parser: comments, blanks, whitespace, trailing comments") {
  const KvConfig cfg = KvConfig::from_string(
      "# full-line comment\n"
      "train.epochs = 12   # trailing comment\n"
      "\n"
      "  quant.fw_pattern=cosine\n"
      "data.noise =\t0.25\n");
  CHECK(cfg.get_int("train.epochs", 0) == 12);
  CHECK(cfg.get_string("quant.fw_pattern", "") == "cosine");
  CHECK(cfg.get_double("data.noise", 0.0) == 0.25);
  CHECK(cfg.has("data.noise"));
  CHECK(!cfg.has("data.seed"));
}

TEST_CASE("kv parser rejects duplicates, missing '=', empty keys") {
  CHECK_THROWS_AS(KvConfig::from_string("a.b = 1\na.b = 2\n"), ConfigError);
  CHECK_THROWS_AS(KvConfig::from_string("just a line\n"), ConfigError);
  CHECK_THROWS_AS(KvConfig::from_string("= 5\n"), ConfigError);
}

TEST_CASE("kv parser errors carry origin and line number") {
  try {
    KvConfig::from_string("ok.key = 1\nbroken line\n", "myfile.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("myfile.cfg:2") != std::string::npos);
  }
}

TEST_CASE("overrides replace file values and may introduce new keys") {
  KvConfig cfg = KvConfig::from_string("train.epochs = 10\n");
  cfg.apply_override("train.epochs=20");
  cfg.apply_override("train.seed = 7");
  CHECK(cfg.get_int("train.epochs", 0) == 20);
  CHECK(cfg.get_uint64("train.seed", 0) == 7);
  CHECK_THROWS_AS(cfg.apply_override("no-equals-sign"), ConfigError);
}

TEST_CASE("canonical text is sorted and reflects overrides") {
  KvConfig cfg = KvConfig::from_string("b.key = 2\na.key = 1\nc.key = 3\n");
  cfg.apply_override("b.key=9");
  CHECK(cfg.canonical_text() == "a.key=1\nb.key=9\nc.key=3\n");
}

TEST_CASE("unknown keys are rejected, known ones pass") {
  KvConfig ok = KvConfig::from_string("train.epochs = 5\nquant.fw_min = 3\n");
  CHECK_NOTHROW(ok.check_known_keys());
  KvConfig bad = KvConfig::from_string("quant.fw_mim = 3\n");  // typo
  try {
    bad.check_known_keys();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("quant.fw_mim") != std::string::npos);
  }
}

TEST_CASE("typed getters: defaults, parses, and key-naming errors") {
  const KvConfig cfg = KvConfig::from_string(
      "i = 42\nu = 18446744073709551615\nd = 1e-3\nbt = true\nbf = 0\n"
      "il = 2, 4, 8\ndl = 0.5,1.5\nbadint = 1.5\nbadbool = yes\n");
  CHECK(cfg.get_int("i", 0) == 42);
  CHECK(cfg.get_int("missing", -7) == -7);
  CHECK(cfg.get_uint64("u", 0) == 18446744073709551615ULL);
  CHECK(cfg.get_double("d", 0.0) == 1e-3);
  CHECK(cfg.get_bool("bt", false));
  CHECK(!cfg.get_bool("bf", true));
  CHECK(cfg.get_bool("missing", true));
  CHECK(cfg.get_int_list("il", {}) == std::vector<int>{2, 4, 8});
  CHECK(cfg.get_double_list("dl", {}) == std::vector<double>{0.5, 1.5});
  CHECK(cfg.get_int_list("missing", {1}) == std::vector<int>{1});

  CHECK_THROWS_AS(cfg.get_int("badint", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_bool("badbool", false), ConfigError);
  CHECK_THROWS_AS(cfg.get_uint64("badint", 0), ConfigError);
  try {
    cfg.get_int("badint", 0);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("badint") != std::string::npos);
  }
}

TEST_CASE("build_datasets: blobs source honors counts and preserves classes on slices") {
  const KvConfig cfg = KvConfig::from_string(
      "data.source = blobs\ndata.train_count = 7\ndata.test_count = 2\n"
      "data.dims = 3\ndata.classes = 3\ndata.seed = 11\n");
  const DataBundle b = build_datasets(cfg, "");
  CHECK(b.train.size() == 7);
  CHECK(b.test.size() == 2);
  CHECK(b.train.example_shape == std::vector<std::int64_t>{3});
  // The two-example test slice cannot contain all three classes, but the
  // generator's class count must survive the split.
  CHECK(b.train.num_classes == 3);
  CHECK(b.test.num_classes == 3);
}

TEST_CASE("build_datasets: digits default and deterministic seeding") {
  const KvConfig cfg = KvConfig::from_string("data.train_count = 20\ndata.test_count = 10\n");
  const DataBundle a = build_datasets(cfg, "");
  CHECK(a.train.example_shape == std::vector<std::int64_t>{1, 16, 16});
  CHECK(a.train.num_classes == 10);
  const DataBundle b = build_datasets(cfg, "");
  CHECK(a.train.inputs == b.train.inputs);
  CHECK(a.test.inputs == b.test.inputs);

  KvConfig reseeded = cfg;
  reseeded.apply_override("data.seed=999");
  const DataBundle c = build_datasets(reseeded, "");
  CHECK(a.train.inputs != c.train.inputs);
}

TEST_CASE("build_datasets: digits cache round trip is bit-identical") {
  const fs::path cache = test_dir() / "cache";
  const KvConfig cfg = KvConfig::from_string(
      "data.train_count = 24\ndata.test_count = 8\ndata.noise = 0.1\ndata.seed = 5\n");
  const DataBundle first = build_datasets(cfg, cache.string());
  int idx_files = 0;
  for (const auto& entry : fs::directory_iterator(cache))
    if (entry.path().extension() == ".idx") ++idx_files;
  CHECK(idx_files == 4);

  const DataBundle second = build_datasets(cfg, cache.string());  // served from cache
  CHECK(second.train.inputs == first.train.inputs);
  CHECK(second.train.labels == first.train.labels);
  CHECK(second.test.inputs == first.test.inputs);
  CHECK(second.test.labels == first.test.labels);

  // A different noise level must key a different cache entry.
  KvConfig other = cfg;
  other.apply_override("data.noise=0.2");
  const DataBundle third = build_datasets(other, cache.string());
  CHECK(third.train.inputs != first.train.inputs);
}

TEST_CASE("build_datasets: bit_gated shape follows gate geometry") {
  const KvConfig cfg = KvConfig::from_string(
      "data.source = bit_gated\ndata.train_count = 12\ndata.test_count = 4\n"
      "data.gate_bits = 4\ndata.info_pairs = 2\ndata.nuisance = 3\n");
  const DataBundle b = build_datasets(cfg, "");
  CHECK(b.train.example_shape == std::vector<std::int64_t>{1 + 2 + 3});
  CHECK(b.train.num_classes == 2);
}

TEST_CASE("build_datasets: csv and idx sources load from configured paths") {
  const fs::path train_csv = test_dir() / "train.csv";
  const fs::path test_csv = test_dir() / "test.csv";
  std::ofstream(train_csv) << "0,1.0,2.0\n1,3.0,4.0\n";
  std::ofstream(test_csv) << "1,5.0,6.0\n";
  const KvConfig csv_cfg = KvConfig::from_string(
      "data.source = csv\ndata.train_csv = " + train_csv.string() +
      "\ndata.test_csv = " + test_csv.string() + "\n");
  const DataBundle c = build_datasets(csv_cfg, "");
  CHECK(c.train.size() == 2);
  CHECK(c.test.size() == 1);
  CHECK(c.test.num_classes == 2);

  Rng rng(3);
  const Dataset digits = make_synthetic_digits(10, 0.1, rng);
  const fs::path img = test_dir() / "d-images.idx";
  const fs::path lab = test_dir() / "d-labels.idx";
  save_idx(img.string(), lab.string(), digits);
  const KvConfig idx_cfg = KvConfig::from_string(
      "data.source = idx\ndata.train_images = " + img.string() +
      "\ndata.train_labels = " + lab.string() + "\ndata.test_images = " + img.string() +
      "\ndata.test_labels = " + lab.string() + "\n");
  const DataBundle d = build_datasets(idx_cfg, "");
  CHECK(d.train.size() == 10);
  CHECK(d.train.inputs == digits.inputs);
}

TEST_CASE("build_datasets rejects bad sources, counts and missing paths") {
  CHECK_THROWS_AS(build_datasets(KvConfig::from_string("data.source = moon\n"), ""), ConfigError);
  CHECK_THROWS_AS(build_datasets(KvConfig::from_string("data.train_count = 0\n"), ""),
                  ConfigError);
  CHECK_THROWS_AS(build_datasets(KvConfig::from_string("data.source = idx\n"), ""), ConfigError);
  CHECK_THROWS_AS(build_datasets(KvConfig::from_string("data.source = csv\n"), ""), ConfigError);
}

TEST_CASE("resolve_train_options fills documented defaults") {
  Rng rng(2);
  const Dataset train = make_gaussian_blobs(64, 8, 2, 2.5, 0.5, rng);
  const TrainOptions opt = resolve_train_options(KvConfig{}, train);
  CHECK(opt.epochs == 40);
  CHECK(opt.batch_size == 50);
  CHECK(opt.momentum == 0.9);
  CHECK(opt.weight_decay == 5e-4);
  CHECK(opt.seed == 1);
  CHECK(opt.fw.pattern == SchedulePattern::cosine);
  CHECK(opt.fw.b_min == 3);
  CHECK(opt.fw.b_max == 8);
  CHECK(opt.fw.total_epochs == 40);
  CHECK(opt.fw.num_cycles == 8);
  CHECK(opt.cpt_start_epoch == 0);
  CHECK(!opt.per_iteration);
  CHECK(opt.bw_bits == 8);
  CHECK(!opt.gradient_cpt);
  CHECK(opt.weight_kind == QuantKind::max_scale_signed);
  CHECK(opt.quantize_input);
  CHECK(opt.input_signed);
  CHECK(opt.lr.boundaries == std::vector<int>{40});
  CHECK(opt.lr.lrs == std::vector<double>{0.05});
  CHECK(!opt.use_cyclic_lr);
  CHECK(opt.cyclic_lr_period == 5);  // one fw cycle
  // Flat 8-dim input resolves to the mlp3 preset.
  REQUIRE(opt.layers.size() == 5);
  CHECK(opt.layers[0].to_string() == "linear:8:64");
  CHECK(opt.layers[4].to_string() == "linear:64:2");
}

TEST_CASE("resolve_train_options: auto preset picks cnn6 for 16x16 images") {
  const KvConfig cfg = KvConfig::from_string("data.train_count = 12\ndata.test_count = 4\n");
  const DataBundle b = build_datasets(cfg, "");
  const TrainOptions opt = resolve_train_options(KvConfig{}, b.train);
  REQUIRE(opt.layers.size() == 12);
  CHECK(opt.layers[0].to_string() == "conv:1:16:3:1:1");
  CHECK(opt.layers[11].to_string() == "linear:128:10");
}

TEST_CASE("resolve_train_options: static pattern pins bits and one cycle") {
  Rng rng(2);
  const Dataset train = make_gaussian_blobs(64, 8, 2, 2.5, 0.5, rng);
  const KvConfig cfg = KvConfig::from_string(
      "quant.fw_pattern = static\nquant.fw_min = 3\nquant.fw_max = 6\n");
  const TrainOptions opt = resolve_train_options(cfg, train);
  CHECK(opt.fw.pattern == SchedulePattern::static_bits);
  CHECK(opt.fw.b_min == 6);
  CHECK(opt.fw.b_max == 6);
  CHECK(opt.fw.num_cycles == 1);
}

TEST_CASE("resolve_train_options: gradient cpt inherits the forward cycle count") {
  Rng rng(2);
  const Dataset train = make_gaussian_blobs(64, 8, 2, 2.5, 0.5, rng);
  const KvConfig cfg = KvConfig::from_string(
      "quant.gradient_cpt = true\nquant.fw_cycles = 4\nquant.bw_min = 4\nquant.bw_max = 6\n");
  const TrainOptions opt = resolve_train_options(cfg, train);
  CHECK(opt.gradient_cpt);
  CHECK(opt.bw.num_cycles == 4);
  CHECK(opt.bw.b_min == 4);
  CHECK(opt.bw.b_max == 6);
  CHECK(opt.bw.total_epochs == opt.epochs);
}

TEST_CASE("resolve_train_options: explicit layers win over presets") {
  Rng rng(2);
  const Dataset train = make_gaussian_blobs(64, 8, 2, 2.5, 0.5, rng);
  const KvConfig cfg = KvConfig::from_string(
      "model.layers = linear:8:4,relu,linear:4:2\nmodel.preset = mlp3\n");
  const TrainOptions opt = resolve_train_options(cfg, train);
  REQUIRE(opt.layers.size() == 3);
  CHECK(opt.layers[0].to_string() == "linear:8:4");
}

TEST_CASE("resolve_train_options converts domain failures to config errors") {
  Rng rng(2);
  const Dataset train = make_gaussian_blobs(64, 8, 2, 2.5, 0.5, rng);
  CHECK_THROWS_AS(
      resolve_train_options(KvConfig::from_string("quant.fw_pattern = wiggle\n"), train),
      ConfigError);
  CHECK_THROWS_AS(
      resolve_train_options(KvConfig::from_string("quant.weight_kind = bogus\n"), train),
      ConfigError);
  CHECK_THROWS_AS(resolve_train_options(KvConfig::from_string("model.layers = dense:8:2\n"), train),
                  ConfigError);
  CHECK_THROWS_AS(resolve_train_options(KvConfig::from_string("model.preset = resnet\n"), train),
                  ConfigError);
  CHECK_THROWS_AS(resolve_train_options(KvConfig::from_string("train.epochs = 0\n"), train),
                  ConfigError);
  CHECK_THROWS_AS(resolve_train_options(KvConfig::from_string("quant.fw_min = 1\n"), train),
                  ConfigError);
  CHECK_THROWS_AS(
      resolve_train_options(KvConfig::from_string("train.lr_boundaries = 10\n"), train),
      ConfigError);  // must end at epochs
}

TEST_CASE("resolve_prt_config maps keys onto validated defaults") {
  const PrtConfig def = resolve_prt_config(KvConfig{});
  CHECK(def.start_bits == 2);
  CHECK(def.max_probe_bits == 8);
  CHECK(def.epochs_per_probe == 1);
  CHECK(def.window == 50);
  CHECK(def.threshold == 1.0);

  const PrtConfig p = resolve_prt_config(KvConfig::from_string(
      "prt.start_bits = 3\nprt.max_bits = 6\nprt.epochs_per_probe = 2\n"
      "prt.window = 10\nprt.threshold = 0.5\n"));
  CHECK(p.start_bits == 3);
  CHECK(p.max_probe_bits == 6);
  CHECK(p.epochs_per_probe == 2);
  CHECK(p.window == 10);
  CHECK(p.threshold == 0.5);

  CHECK_THROWS_AS(resolve_prt_config(KvConfig::from_string("prt.start_bits = 1\n")), ConfigError);
  CHECK_THROWS_AS(resolve_prt_config(KvConfig::from_string("prt.max_bits = 1\n")), ConfigError);
}
