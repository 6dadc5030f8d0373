// cpt: cyclic precision training lab.
//
// Subcommands: train, prt, schedule, cost, landscape, sweep, report.
// Exit codes: 0 success, 1 usage error, 2 config error, 3 runtime
// failure (a NaN abort dumps the last good checkpoint before exiting).

#include "cpt/checkpoint.hpp"
#include "cpt/config.hpp"
#include "cpt/cost_model.hpp"
#include "cpt/errors.hpp"
#include "cpt/landscape.hpp"
#include "cpt/model.hpp"
#include "cpt/numerics.hpp"
#include "cpt/prt.hpp"
#include "cpt/schedule.hpp"
#include "cpt/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
};

void add_common_options(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "Config file (dotted key = value lines)")
      ->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", args.overrides,
                  "Override a config key, e.g. --set train.epochs=10 (repeatable)");
  const char* env_root = std::getenv("CPT_OUT_ROOT");
  args.out_dir = env_root != nullptr && *env_root != '\0' ? env_root : "out";
  cmd->add_option("-o,--out", args.out_dir, "Output directory (default $CPT_OUT_ROOT or ./out)");
}

cpt::KvConfig load_config(const CommonArgs& args) {
  cpt::KvConfig cfg = args.config_path.empty() ? cpt::KvConfig{}
                                               : cpt::KvConfig::from_file(args.config_path);
  for (const std::string& o : args.overrides) cfg.apply_override(o);
  cfg.check_known_keys();
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

// The digits source caches its IDX files here so reruns reload instead
// of regenerating (the result is bit-identical either way).
std::string data_cache_dir(const CommonArgs& args) {
  return (fs::path(args.out_dir) / "data_cache").string();
}

// Only the keys that determine the training trajectory count toward a
// checkpoint's identity; analysis-time keys (landscape.*, prt.*, ...)
// may differ between the run that wrote a checkpoint and the command
// that consumes it.
std::uint64_t run_identity_hash(const cpt::KvConfig& cfg) {
  std::string text;
  for (const auto& [key, value] : cfg.values()) {
    if (key.rfind("data.", 0) == 0 || key.rfind("model.", 0) == 0 ||
        key.rfind("train.", 0) == 0 || key.rfind("quant.", 0) == 0)
      text += key + "=" + value + "\n";
  }
  return cpt::fnv1a64(text);
}

void write_metrics(const fs::path& dir, const cpt::MetricsLog& metrics) {
  write_file(dir / "metrics.csv", metrics.to_csv());
  write_file(dir / "metrics.jsonl", metrics.to_jsonl());
}

void print_epoch(const cpt::EpochRecord& r) {
  std::cout << "epoch " << r.epoch << "  fw=" << r.fw_bits << " bw=" << r.bw_bits
            << " lr=" << cpt::format_double(r.lr) << "  loss=" << cpt::format_double(r.train_loss)
            << "  train=" << cpt::format_double(r.train_acc)
            << "%  test=" << cpt::format_double(r.test_acc) << "%\n";
}

// Runs the full plan with progress lines, periodic checkpoints and the
// NaN-abort dump. Returns 0 or 3.
int run_to_completion(cpt::Trainer& trainer, const fs::path& out, std::uint64_t cfg_hash,
                      int checkpoint_every) {
  cpt::RunHooks hooks;
  hooks.after_epoch = [&](const cpt::Trainer& t, const cpt::EpochRecord& r) {
    print_epoch(r);
    if (checkpoint_every > 0 && (r.epoch + 1) % checkpoint_every == 0) {
      cpt::TrainerSnapshot snap = t.snapshot();
      snap.config_hash = cfg_hash;
      cpt::save_checkpoint((out / "checkpoint.ckpt").string(), snap);
    }
  };
  try {
    trainer.run(&hooks);
  } catch (const cpt::NanAbortError& e) {
    cpt::TrainerSnapshot snap = trainer.last_good_snapshot();
    snap.config_hash = cfg_hash;
    const fs::path dump = out / "abort.ckpt";
    cpt::save_checkpoint(dump.string(), snap);
    write_metrics(out, snap.metrics);
    std::cerr << "error: " << e.what() << "\n"
              << "last good state written to " << dump.string() << "\n";
    return 3;
  }
  cpt::TrainerSnapshot snap = trainer.snapshot();
  snap.config_hash = cfg_hash;
  cpt::save_checkpoint((out / "final.ckpt").string(), snap);
  write_metrics(out, trainer.metrics());
  return 0;
}

int cmd_train(const CommonArgs& args, bool dry_run, const std::string& resume_path) {
  cpt::KvConfig cfg = load_config(args);
  cpt::DataBundle data = cpt::build_datasets(cfg, dry_run ? "" : data_cache_dir(args));
  cpt::TrainOptions opt = cpt::resolve_train_options(cfg, data.train);

  if (dry_run) {
    cpt::Model model(opt.layers, opt.input_shape);
    std::cout << "epoch,fw_bits,bw_bits,lr\n";
    for (const cpt::EpochPlan& p : cpt::build_epoch_plan(opt)) {
      std::cout << p.epoch << ',' << p.fw_bits << ',' << p.bw_bits << ','
                << cpt::format_double(p.lr) << '\n';
    }
    const cpt::CostLedger cost = cpt::enumerate_cost(
        opt, model.macs_per_sample(), static_cast<std::uint64_t>(model.param_count()),
        data.train.size());
    std::cout << "# params=" << model.param_count()
              << " macs_per_sample=" << model.macs_per_sample()
              << " total_bitops=" << cost.total_bitops()
              << " optimizer_bitops=" << cost.optimizer_bitops << '\n';
    return 0;
  }

  const fs::path out(args.out_dir);
  fs::create_directories(out);
  write_file(out / "resolved.cfg", cfg.canonical_text());
  const std::uint64_t cfg_hash = run_identity_hash(cfg);

  cpt::Trainer trainer(opt, data.train, data.test);
  if (!resume_path.empty()) {
    cpt::TrainerSnapshot snap = cpt::load_checkpoint(resume_path);
    if (snap.config_hash != cfg_hash)
      throw cpt::ConfigError("checkpoint " + resume_path +
                             " was written under a different configuration");
    trainer.restore(snap);
    std::cout << "resumed at epoch " << trainer.next_epoch() << "\n";
  }

  const int rc = run_to_completion(trainer, out, cfg_hash,
                                   cfg.get_int("train.checkpoint_every", 0));
  if (rc == 0) {
    const cpt::EpochRecord& last = trainer.metrics().records.back();
    std::cout << "done: test_acc=" << cpt::format_double(last.test_acc)
              << "% total_bitops=" << trainer.ledger().total_bitops() << "\n";
  }
  return rc;
}

int cmd_prt(const CommonArgs& args) {
  cpt::KvConfig cfg = load_config(args);
  cpt::DataBundle data = cpt::build_datasets(cfg, data_cache_dir(args));
  cpt::TrainOptions opt = cpt::resolve_train_options(cfg, data.train);
  const cpt::PrtConfig pcfg = cpt::resolve_prt_config(cfg);

  cpt::Trainer probe_trainer(opt, data.train, data.test);
  const cpt::ProbeRunner runner = cpt::trainer_probe_runner(probe_trainer);
  const cpt::PrtResult result = cpt::run_prt(pcfg, opt.fw.cycle_length(), runner);

  const fs::path out(args.out_dir);
  fs::create_directories(out);
  write_file(out / "resolved.cfg", cfg.canonical_text());
  write_file(out / "prt.json", cpt::prt_result_to_json(result) + "\n");
  write_file(out / "prt_trace.csv", cpt::prt_trace_to_csv(result));
  std::cout << cpt::prt_result_to_json(result) << "\n";

  if (cfg.get_bool("prt.chain_train", false)) {
    const auto [lo, hi] = cpt::resolve_bounds(result, cfg.get_int("prt.baseline_bits", 8));
    std::cout << "chained training with bounds " << lo << ".." << hi << "\n";
    opt.fw.b_min = lo;
    opt.fw.b_max = hi;
    opt.validate(data.train.size());
    // The probe trainer's weights are spent; the real run starts fresh.
    cpt::Trainer trainer(opt, data.train, data.test);
    const std::uint64_t cfg_hash = run_identity_hash(cfg);
    const int rc = run_to_completion(trainer, out, cfg_hash,
                                     cfg.get_int("train.checkpoint_every", 0));
    if (rc != 0) return rc;
    const cpt::EpochRecord& last = trainer.metrics().records.back();
    std::cout << "done: test_acc=" << cpt::format_double(last.test_acc)
              << "% total_bitops=" << trainer.ledger().total_bitops() << "\n";
  }
  return 0;
}

int cmd_schedule(int b_min, int b_max, int epochs, int cycles, const std::string& pattern,
                 const std::string& out_dir, bool write_out) {
  cpt::PrecisionSchedule s;
  try {
    s.pattern = cpt::parse_schedule_pattern(pattern);
    s.b_min = b_min;
    s.b_max = b_max;
    s.total_epochs = epochs;
    s.num_cycles = cycles;
    if (s.pattern == cpt::SchedulePattern::static_bits) s.b_min = s.b_max;
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw cpt::ConfigError(e.what());
  }
  std::string csv = "epoch,bits\n";
  for (int t = 0; t < epochs; ++t)
    csv += std::to_string(t) + ',' + std::to_string(cpt::bits_at(s, t)) + '\n';
  std::cout << csv;
  if (write_out) {
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "schedule.csv", csv);
  }
  return 0;
}

// "fw3-8_bw8" -> cosine FW(3,8), BW 8; "fw8_bw8" -> static FW 8, BW 8.
// Anything that names an existing file is read as a full config instead.
cpt::KvConfig config_for_cost_spec(const CommonArgs& args, const std::string& spec) {
  if (fs::exists(spec)) {
    cpt::KvConfig cfg = cpt::KvConfig::from_file(spec);
    for (const std::string& o : args.overrides) cfg.apply_override(o);
    cfg.check_known_keys();
    return cfg;
  }
  static const std::regex shorthand(R"(fw(\d+)(?:-(\d+))?_bw(\d+))");
  std::smatch m;
  if (!std::regex_match(spec, m, shorthand))
    throw cpt::ConfigError("cost spec '" + spec +
                           "': expected fw<min>-<max>_bw<bits>, fw<bits>_bw<bits>, "
                           "or a config file path");
  cpt::KvConfig cfg = load_config(args);
  if (m[2].matched) {
    cfg.apply_override("quant.fw_pattern=cosine");
    cfg.apply_override("quant.fw_min=" + m[1].str());
    cfg.apply_override("quant.fw_max=" + m[2].str());
  } else {
    cfg.apply_override("quant.fw_pattern=static");
    cfg.apply_override("quant.fw_max=" + m[1].str());
  }
  cfg.apply_override("quant.bw_bits=" + m[3].str());
  return cfg;
}

nlohmann::ordered_json ledger_json(const cpt::CostLedger& l) {
  nlohmann::ordered_json j;
  j["forward_bitops"] = l.forward_bitops;
  j["error_backprop_bitops"] = l.error_backprop_bitops;
  j["weight_grad_bitops"] = l.weight_grad_bitops;
  j["total_bitops"] = l.total_bitops();
  j["optimizer_bitops"] = l.optimizer_bitops;
  j["steps"] = l.steps;
  return j;
}

int cmd_cost(const CommonArgs& args, const std::string& spec_a, const std::string& spec_b,
             bool write_out) {
  const cpt::KvConfig cfg_a = config_for_cost_spec(args, spec_a);
  const cpt::KvConfig cfg_b = config_for_cost_spec(args, spec_b);
  // No training happens; datasets are built only for shapes and sizes.
  const cpt::DataBundle data_a = cpt::build_datasets(cfg_a, "");
  const cpt::DataBundle data_b = cpt::build_datasets(cfg_b, "");
  const cpt::TrainOptions opt_a = cpt::resolve_train_options(cfg_a, data_a.train);
  const cpt::TrainOptions opt_b = cpt::resolve_train_options(cfg_b, data_b.train);

  auto enumerate = [](const cpt::TrainOptions& opt, const cpt::Dataset& train) {
    cpt::Model model(opt.layers, opt.input_shape);
    return cpt::enumerate_cost(opt, model.macs_per_sample(),
                               static_cast<std::uint64_t>(model.param_count()), train.size());
  };
  const cpt::CostLedger la = enumerate(opt_a, data_a.train);
  const cpt::CostLedger lb = enumerate(opt_b, data_b.train);
  // --b is the baseline; positive percentages mean --a is cheaper.
  const cpt::CostComparison cmp = cpt::compare_costs(lb, la);

  nlohmann::ordered_json j;
  j["a"] = ledger_json(la);
  j["a"]["spec"] = spec_a;
  j["b"] = ledger_json(lb);
  j["b"]["spec"] = spec_b;
  j["reduction_pct"]["forward"] = cmp.forward_pct;
  j["reduction_pct"]["error_backprop"] = cmp.error_backprop_pct;
  j["reduction_pct"]["weight_grad"] = cmp.weight_grad_pct;
  j["reduction_pct"]["total"] = cmp.total_pct;
  j["reduction_pct"]["optimizer"] = cmp.optimizer_pct;
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (write_out) {
    fs::create_directories(args.out_dir);
    write_file(fs::path(args.out_dir) / "cost.json", text);
  }
  return 0;
}

int cmd_landscape(const CommonArgs& args, const std::string& checkpoint_path) {
  cpt::KvConfig cfg = load_config(args);
  cpt::DataBundle data = cpt::build_datasets(cfg, data_cache_dir(args));
  cpt::TrainOptions opt = cpt::resolve_train_options(cfg, data.train);

  cpt::TrainerSnapshot snap = cpt::load_checkpoint(checkpoint_path);
  if (snap.config_hash != run_identity_hash(cfg))
    throw cpt::ConfigError("checkpoint " + checkpoint_path +
                           " was written under a different configuration");
  cpt::Trainer trainer(opt, data.train, data.test);
  trainer.restore(snap);

  const std::string split = cfg.get_string("landscape.split", "test");
  if (split != "test" && split != "train")
    throw cpt::ConfigError("landscape.split: expected train or test, got '" + split + "'");
  const cpt::Dataset& ds = split == "train" ? data.train : data.test;

  cpt::ForwardOptions fo;
  fo.fw_bits = cfg.get_int("landscape.fw_bits", 32);
  fo.weight_kind = opt.weight_kind;
  fo.quantize_input = opt.quantize_input;
  fo.input_signed = opt.input_signed;

  cpt::Rng rng(cfg.get_uint64("landscape.seed", 7));
  cpt::LandscapeResult res;
  try {
    res = cpt::model_loss_landscape(trainer.model(), ds,
                                    cfg.get_int("landscape.batch_size", opt.batch_size), fo,
                                    cfg.get_double("landscape.half_width", 1.0),
                                    cfg.get_int("landscape.grid_points", 21), rng);
  } catch (const std::invalid_argument& e) {
    throw cpt::ConfigError(std::string("landscape: ") + e.what());
  }

  const fs::path out(args.out_dir);
  fs::create_directories(out);
  write_file(out / "resolved.cfg", cfg.canonical_text());
  write_file(out / "landscape.csv", cpt::landscape_to_csv(res));
  const int center = (cfg.get_int("landscape.grid_points", 21) - 1) / 2;
  std::cout << "wrote " << (out / "landscape.csv").string()
            << " center_loss=" << cpt::format_double(res.at(center, center)) << "\n";
  return 0;
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string::npos ? text.size() : comma;
    std::string item = text.substr(start, end - start);
    if (const auto first = item.find_first_not_of(" \t"); first != std::string::npos)
      item = item.substr(first, item.find_last_not_of(" \t") - first + 1);
    else
      item.clear();
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

int cmd_sweep(const CommonArgs& args) {
  const cpt::KvConfig cfg = load_config(args);
  const cpt::DataBundle data = cpt::build_datasets(cfg, data_cache_dir(args));

  const std::vector<std::string> patterns = split_csv(cfg.get_string("sweep.patterns", "cosine"));
  if (patterns.empty()) throw cpt::ConfigError("sweep.patterns is empty");
  const std::vector<int> cycles = cfg.get_int_list("sweep.cycles", {8});
  const std::vector<int> seeds = cfg.get_int_list("sweep.seeds", {1});

  struct Bounds {
    int lo = 0, hi = 0;
  };
  std::vector<Bounds> bounds;
  for (const std::string& item : split_csv(cfg.get_string("sweep.bounds", "3-8"))) {
    const auto dash = item.find('-');
    Bounds b;
    try {
      if (dash == std::string::npos) {
        b.lo = b.hi = std::stoi(item);
      } else {
        b.lo = std::stoi(item.substr(0, dash));
        b.hi = std::stoi(item.substr(dash + 1));
      }
    } catch (const std::exception&) {
      throw cpt::ConfigError("sweep.bounds: cannot parse '" + item + "'");
    }
    bounds.push_back(b);
  }
  if (bounds.empty()) throw cpt::ConfigError("sweep.bounds is empty");

  const fs::path out(args.out_dir);
  fs::create_directories(out);
  write_file(out / "resolved.cfg", cfg.canonical_text());

  std::string summary = "pattern,cycles,b_min,b_max,seed,final_test_acc,total_bitops\n";
  for (const std::string& pattern : patterns) {
    for (const int n : cycles) {
      for (const Bounds& b : bounds) {
        for (const int seed : seeds) {
          cpt::KvConfig trial = cfg;
          trial.apply_override("quant.fw_pattern=" + pattern);
          trial.apply_override("quant.fw_cycles=" + std::to_string(n));
          trial.apply_override("quant.fw_min=" + std::to_string(b.lo));
          trial.apply_override("quant.fw_max=" + std::to_string(b.hi));
          trial.apply_override("train.seed=" + std::to_string(seed));
          const cpt::TrainOptions opt = cpt::resolve_train_options(trial, data.train);
          cpt::Trainer trainer(opt, data.train, data.test);
          trainer.run();
          const cpt::EpochRecord& last = trainer.metrics().records.back();

          const std::string tag = pattern + "_c" + std::to_string(n) + "_b" +
                                  std::to_string(b.lo) + "-" + std::to_string(b.hi) + "_s" +
                                  std::to_string(seed);
          const fs::path run_dir = out / "runs" / tag;
          fs::create_directories(run_dir);
          write_file(run_dir / "resolved.cfg", trial.canonical_text());
          write_metrics(run_dir, trainer.metrics());

          summary += pattern + ',' + std::to_string(n) + ',' + std::to_string(b.lo) + ',' +
                     std::to_string(b.hi) + ',' + std::to_string(seed) + ',' +
                     cpt::format_double(last.test_acc) + ',' +
                     std::to_string(trainer.ledger().total_bitops()) + '\n';
          std::cout << tag << ": test_acc=" << cpt::format_double(last.test_acc)
                    << "% total_bitops=" << trainer.ledger().total_bitops() << "\n";
        }
      }
    }
  }
  write_file(out / "sweep_summary.csv", summary);
  std::cout << "wrote " << (out / "sweep_summary.csv").string() << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_dir,
               bool write_out) {
  std::string csv = "run,epochs,final_test_acc,best_test_acc,total_bitops\n";
  for (const std::string& input : inputs) {
    fs::path path(input);
    if (fs::is_directory(path)) path /= "metrics.jsonl";
    std::ifstream in(path);
    if (!in) throw cpt::ConfigError("cannot open metrics log " + path.string());
    std::string line;
    int epochs = 0;
    double final_acc = 0.0, best_acc = 0.0;
    std::uint64_t bitops = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw cpt::ConfigError(path.string() + ": " + e.what());
      }
      ++epochs;
      final_acc = j.at("test_acc").get<double>();
      best_acc = std::max(best_acc, final_acc);
      bitops = j.at("cum_total_bitops").get<std::uint64_t>();
    }
    if (epochs == 0) throw cpt::ConfigError(path.string() + ": no records");
    const std::string label =
        fs::is_directory(fs::path(input)) ? fs::path(input).filename().string() : input;
    csv += label + ',' + std::to_string(epochs) + ',' + cpt::format_double(final_acc) + ',' +
           cpt::format_double(best_acc) + ',' + std::to_string(bitops) + '\n';
  }
  std::cout << csv;
  if (write_out) {
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "report.csv", csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cyclic precision training lab"};
  app.require_subcommand(1);
  int rc = 0;

  CommonArgs train_args;
  bool dry_run = false;
  std::string resume_path;
  CLI::App* train = app.add_subcommand("train", "Train a model under a precision schedule");
  add_common_options(train, train_args);
  train->add_flag("--dry-run", dry_run, "Print the epoch plan and analytic cost, run nothing");
  train->add_option("--resume", resume_path, "Continue from a checkpoint")
      ->check(CLI::ExistingFile);
  train->callback([&] { rc = cmd_train(train_args, dry_run, resume_path); });

  CommonArgs prt_args;
  CLI::App* prt = app.add_subcommand("prt", "Precision range test, optionally chained training");
  add_common_options(prt, prt_args);
  prt->callback([&] { rc = cmd_prt(prt_args); });

  int b_min = 3, b_max = 8, epochs = 160, cycles = 8;
  std::string pattern = "cosine";
  std::string sched_out = "out";
  CLI::App* sched = app.add_subcommand("schedule", "Print an epoch,bits table");
  sched->add_option("--b-min", b_min, "Lower precision bound");
  sched->add_option("--b-max", b_max, "Upper precision bound");
  sched->add_option("--epochs", epochs, "Total epochs");
  sched->add_option("--cycles", cycles, "Number of precision cycles");
  sched->add_option("--pattern", pattern, "cosine|cosine_anneal|triangular|static|progressive");
  CLI::Option* sched_out_opt =
      sched->add_option("-o,--out", sched_out, "Also write <out>/schedule.csv");
  sched->callback([&] {
    rc = cmd_schedule(b_min, b_max, epochs, cycles, pattern, sched_out,
                      sched_out_opt->count() > 0);
  });

  CommonArgs cost_args;
  std::string spec_a, spec_b;
  CLI::App* cost = app.add_subcommand("cost", "Analytic BitOPs comparison, no training");
  add_common_options(cost, cost_args);
  cost->add_option("--a", spec_a, "First setup: fw<min>-<max>_bw<b>, fw<b>_bw<b>, or config file")
      ->required();
  cost->add_option("--b", spec_b, "Second setup (baseline)")->required();
  CLI::Option* cost_out_opt = cost->get_option("--out");
  cost->callback(
      [&] { rc = cmd_cost(cost_args, spec_a, spec_b, cost_out_opt->count() > 0); });

  CommonArgs land_args;
  std::string checkpoint_path;
  CLI::App* land = app.add_subcommand("landscape", "2-d loss slice around a checkpoint");
  add_common_options(land, land_args);
  land->add_option("--checkpoint", checkpoint_path, "Checkpoint to slice around")
      ->required()
      ->check(CLI::ExistingFile);
  land->callback([&] { rc = cmd_landscape(land_args, checkpoint_path); });

  CommonArgs sweep_args;
  CLI::App* sweep = app.add_subcommand("sweep", "Grid of runs over pattern x cycles x bounds");
  add_common_options(sweep, sweep_args);
  sweep->callback([&] { rc = cmd_sweep(sweep_args); });

  std::vector<std::string> report_inputs;
  std::string report_out = "out";
  CLI::App* report = app.add_subcommand("report", "Aggregate metrics.jsonl logs into a table");
  report->add_option("inputs", report_inputs, "metrics.jsonl files or run directories")
      ->required();
  CLI::Option* report_out_opt =
      report->add_option("-o,--out", report_out, "Also write <out>/report.csv");
  report->callback(
      [&] { rc = cmd_report(report_inputs, report_out, report_out_opt->count() > 0); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const cpt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cpt::NanAbortError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return rc;
}
