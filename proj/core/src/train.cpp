#include "cpt/train.hpp"

#include "cpt/autodiff.hpp"
#include "cpt/errors.hpp"
#include "cpt/numerics.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cpt {

std::string MetricsLog::to_csv() const {
  std::string out = "epoch,fw_bits,bw_bits,lr,train_loss,train_acc,test_acc,cum_total_bitops\n";
  for (const EpochRecord& r : records) {
    out += std::to_string(r.epoch) + ',' + std::to_string(r.fw_bits) + ',' +
           std::to_string(r.bw_bits) + ',' + format_double(r.lr) + ',' +
           format_double(r.train_loss) + ',' + format_double(r.train_acc) + ',' +
           format_double(r.test_acc) + ',' + std::to_string(r.cum_total_bitops) + '\n';
  }
  return out;
}

std::string MetricsLog::to_jsonl() const {
  std::string out;
  for (const EpochRecord& r : records) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["fw_bits"] = r.fw_bits;
    j["bw_bits"] = r.bw_bits;
    j["lr"] = r.lr;
    j["train_loss"] = r.train_loss;
    j["train_acc"] = r.train_acc;
    j["test_acc"] = r.test_acc;
    j["cum_total_bitops"] = r.cum_total_bitops;
    out += j.dump() + '\n';
  }
  return out;
}

void TrainOptions::validate(std::int64_t train_size) const {
  auto fail = [](const std::string& msg) { throw ConfigError("train config: " + msg); };
  if (layers.empty()) fail("layer list is empty");
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (train_size < 1) fail("training set is empty");
  if (momentum < 0.0 || momentum >= 1.0) fail("momentum must be in [0, 1)");
  if (weight_decay < 0.0) fail("weight_decay must be >= 0");
  try {
    fw.validate();
    if (gradient_cpt) bw.validate();
    if (!use_cyclic_lr) lr.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (fw.total_epochs != epochs) fail("fw schedule total_epochs must equal epochs");
  if (use_cyclic_lr) {
    if (cyclic_lr_period < 1) fail("cyclic_lr_period must be >= 1");
    if (!(cyclic_lr_min > 0.0) || !(cyclic_lr_max >= cyclic_lr_min))
      fail("cyclic lr requires 0 < min <= max");
  } else if (lr.boundaries.back() != epochs) {
    fail("lr schedule must end exactly at epochs");
  }
  if (cpt_start_epoch < 0 || cpt_start_epoch >= epochs) fail("cpt_start_epoch must be in [0, epochs)");
  if (bw_bits < 2 || bw_bits > 32) fail("bw_bits must be in [2, 32]");
  if (gradient_cpt && bw.total_epochs != epochs) fail("bw schedule total_epochs must equal epochs");
}

int planned_fw_bits(const TrainOptions& opt, int epoch) {
  if (epoch < opt.cpt_start_epoch) return opt.fw.b_min;
  return bits_at(opt.fw, epoch);
}

int planned_bw_bits(const TrainOptions& opt, int epoch) {
  return opt.gradient_cpt ? bits_at(opt.bw, epoch) : opt.bw_bits;
}

double planned_lr(const TrainOptions& opt, int epoch) {
  return opt.use_cyclic_lr
             ? cyclic_lr_at(epoch, opt.cyclic_lr_max, opt.cyclic_lr_min, opt.cyclic_lr_period)
             : lr_at(opt.lr, epoch);
}

namespace {

int step_fw_bits(const TrainOptions& opt, int epoch, std::int64_t step, std::int64_t steps) {
  if (!opt.per_iteration || step == 0) return planned_fw_bits(opt, epoch);
  if (epoch < opt.cpt_start_epoch) return opt.fw.b_min;
  double t = static_cast<double>(epoch) +
             static_cast<double>(step) / static_cast<double>(steps);
  return bits_at_fractional(opt.fw, t);
}

}  // namespace

std::vector<EpochPlan> build_epoch_plan(const TrainOptions& opt) {
  std::vector<EpochPlan> plan;
  plan.reserve(static_cast<std::size_t>(opt.epochs));
  for (int t = 0; t < opt.epochs; ++t)
    plan.push_back({t, planned_fw_bits(opt, t), planned_bw_bits(opt, t), planned_lr(opt, t)});
  return plan;
}

CostLedger enumerate_cost(const TrainOptions& opt, std::uint64_t macs_per_sample,
                          std::uint64_t param_count, std::int64_t train_size) {
  opt.validate(train_size);
  std::int64_t bs = opt.batch_size;
  std::int64_t full = train_size / bs;
  std::int64_t rem = train_size % bs;
  std::int64_t steps = full + (rem ? 1 : 0);
  CostLedger ledger;
  for (int t = 0; t < opt.epochs; ++t) {
    int bw = planned_bw_bits(opt, t);
    for (std::int64_t s = 0; s < steps; ++s) {
      std::uint64_t n = static_cast<std::uint64_t>(s < full ? bs : rem);
      int fw = step_fw_bits(opt, t, s, steps);
      ledger.add_training_macs(macs_per_sample * n, fw, fw, bw);
      ledger.add_optimizer_update(param_count, bw);
    }
  }
  return ledger;
}

std::vector<std::int64_t> argmax_rows(const Tensor& logits) {
  if (logits.ndim() != 2) throw std::invalid_argument("argmax_rows: expected a 2-d tensor");
  std::int64_t N = logits.dim(0), C = logits.dim(1);
  std::vector<std::int64_t> out(static_cast<std::size_t>(N));
  for (std::int64_t n = 0; n < N; ++n) {
    const double* row = logits.data() + n * C;
    std::int64_t best = 0;
    for (std::int64_t c = 1; c < C; ++c)
      if (row[c] > row[best]) best = c;
    out[static_cast<std::size_t>(n)] = best;
  }
  return out;
}

Trainer::Trainer(TrainOptions opt, Dataset train_set, Dataset test_set)
    : opt_(std::move(opt)),
      train_(std::move(train_set)),
      test_(std::move(test_set)),
      model_(opt_.layers, opt_.input_shape),
      rng_(opt_.seed) {
  train_.validate();
  test_.validate();
  opt_.validate(train_.size());
  if (train_.example_shape != opt_.input_shape)
    throw ConfigError("train config: dataset example shape does not match model input shape");
  if (test_.example_shape != opt_.input_shape)
    throw ConfigError("train config: test set example shape does not match model input shape");
  if (train_.num_classes > model_.num_classes() || test_.num_classes > model_.num_classes())
    throw ConfigError("train config: model has fewer output classes than the dataset");
  model_.init_params(rng_);
  velocities_.reserve(model_.params().size());
  for (const Tensor& p : model_.params()) velocities_.push_back(Tensor(p.shape()));
  last_good_ = snapshot();
}

const EpochRecord& Trainer::run_epoch() { return epoch_impl(std::nullopt); }

const EpochRecord& Trainer::run_epoch_at(int fw_bits, int bw_bits, double lr) {
  return epoch_impl(EpochPlan{next_epoch_, fw_bits, bw_bits, lr});
}

const EpochRecord& Trainer::epoch_impl(std::optional<EpochPlan> forced) {
  if (!forced && next_epoch_ >= opt_.epochs)
    throw std::logic_error("Trainer::run_epoch: all planned epochs already ran");
  int epoch = next_epoch_;
  int fw_e = forced ? forced->fw_bits : planned_fw_bits(opt_, epoch);
  int bw_e = forced ? forced->bw_bits : planned_bw_bits(opt_, epoch);
  double lr = forced ? forced->lr : planned_lr(opt_, epoch);

  std::int64_t n = train_.size();
  std::int64_t bs = opt_.batch_size;
  std::int64_t steps = (n + bs - 1) / bs;
  std::vector<std::int64_t> indices(static_cast<std::size_t>(n));
  std::iota(indices.begin(), indices.end(), 0);
  rng_.shuffle(indices);

  batch_accs_.clear();
  double loss_sum = 0.0;
  std::int64_t correct = 0;
  std::uint64_t param_count = static_cast<std::uint64_t>(model_.param_count());

  for (std::int64_t s = 0; s < steps; ++s) {
    std::int64_t lo = s * bs;
    std::int64_t len = std::min(bs, n - lo);
    int fw_s = forced ? fw_e : step_fw_bits(opt_, epoch, s, steps);
    try {
      std::span<const std::int64_t> idx(indices.data() + lo, static_cast<std::size_t>(len));
      Tensor batch = train_.batch_inputs(idx);
      std::vector<std::int64_t> labels = train_.batch_labels(idx);

      Tape tape;
      ForwardOptions fo;
      fo.fw_bits = fw_s;
      fo.bw_bits = bw_e;
      fo.weight_kind = opt_.weight_kind;
      fo.quantize_input = opt_.quantize_input;
      fo.input_signed = opt_.input_signed;
      fo.training = true;
      fo.rng = &rng_;
      fo.ledger = &ledger_;
      ForwardResult fr = model_.forward(tape, batch, fo);
      Var loss_var = softmax_cross_entropy(tape, fr.logits, labels);
      double loss = tape.value(loss_var)[0];
      if (!std::isfinite(loss)) throw NonFiniteError("training loss is non-finite");

      std::vector<std::int64_t> preds = argmax_rows(tape.value(fr.logits));
      std::int64_t batch_correct = 0;
      for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == labels[i]) ++batch_correct;
      correct += batch_correct;
      batch_accs_.push_back(100.0 * static_cast<double>(batch_correct) /
                            static_cast<double>(len));
      loss_sum += loss * static_cast<double>(len);

      tape.backward(loss_var);
      std::vector<Tensor>& params = model_.params();
      for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const Tensor* g = &tape.grad(fr.param_vars[pi]);
        Tensor gq;
        if (bw_e < 32) {
          gq = quantize_max_scale(*g, bw_e, true, Rounding::stochastic, &rng_);
          g = &gq;
        }
        sgd_step(params[pi], *g, velocities_[pi], lr, opt_.momentum, opt_.weight_decay);
      }
      ledger_.add_optimizer_update(param_count, bw_e);
      for (const Tensor& p : params)
        if (!p.all_finite()) throw NonFiniteError("parameters diverged after update");
    } catch (const NonFiniteError& e) {
      throw NanAbortError(std::string("training aborted at epoch ") + std::to_string(epoch) +
                              ", step " + std::to_string(s) + ": " + e.what(),
                          epoch, static_cast<int>(s));
    }
  }

  EpochRecord rec;
  rec.epoch = epoch;
  rec.fw_bits = fw_e;
  rec.bw_bits = bw_e;
  rec.lr = lr;
  rec.train_loss = loss_sum / static_cast<double>(n);
  rec.train_acc = 100.0 * static_cast<double>(correct) / static_cast<double>(n);
  rec.test_acc = evaluate(test_, fw_e);
  rec.cum_total_bitops = ledger_.total_bitops();
  metrics_.records.push_back(rec);
  next_epoch_ = epoch + 1;
  last_good_ = snapshot();
  return metrics_.records.back();
}

void Trainer::run(const RunHooks* hooks) {
  while (next_epoch_ < opt_.epochs) {
    const EpochRecord& rec = run_epoch();
    if (hooks && hooks->after_epoch) hooks->after_epoch(*this, rec);
  }
}

double Trainer::evaluate(const Dataset& ds, int fw_bits) const {
  if (ds.size() < 1) throw std::invalid_argument("evaluate: empty dataset");
  std::int64_t n = ds.size();
  std::int64_t bs = opt_.batch_size;
  std::int64_t correct = 0;
  std::vector<std::int64_t> idx;
  for (std::int64_t lo = 0; lo < n; lo += bs) {
    std::int64_t len = std::min(bs, n - lo);
    idx.resize(static_cast<std::size_t>(len));
    std::iota(idx.begin(), idx.end(), lo);
    Tensor batch = ds.batch_inputs(idx);
    std::vector<std::int64_t> labels = ds.batch_labels(idx);
    Tape tape;
    ForwardOptions fo;
    fo.fw_bits = fw_bits;
    fo.bw_bits = 32;
    fo.weight_kind = opt_.weight_kind;
    fo.quantize_input = opt_.quantize_input;
    fo.input_signed = opt_.input_signed;
    fo.training = false;
    ForwardResult fr = model_.forward(tape, batch, fo);
    std::vector<std::int64_t> preds = argmax_rows(tape.value(fr.logits));
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (preds[i] == labels[i]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

TrainerSnapshot Trainer::snapshot() const {
  TrainerSnapshot s;
  s.next_epoch = next_epoch_;
  s.rng_state = rng_.save_state();
  s.params = model_.params();
  s.velocities = velocities_;
  s.ledger = ledger_;
  s.metrics = metrics_;
  return s;
}

void Trainer::restore(const TrainerSnapshot& snap) {
  std::vector<Tensor>& params = model_.params();
  if (snap.params.size() != params.size() || snap.velocities.size() != params.size())
    throw ConfigError("checkpoint: parameter tensor count does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!snap.params[i].same_shape(params[i]) || !snap.velocities[i].same_shape(params[i]))
      throw ConfigError("checkpoint: parameter shapes do not match the model");
  if (snap.next_epoch < 0 || snap.next_epoch > opt_.epochs)
    throw ConfigError("checkpoint: epoch index outside the configured run");
  params = snap.params;
  velocities_ = snap.velocities;
  rng_.restore_state(snap.rng_state);
  ledger_ = snap.ledger;
  metrics_ = snap.metrics;
  next_epoch_ = snap.next_epoch;
  last_good_ = snap;
}

double run_three_stage_protocol(const TrainOptions& base, const Dataset& train_set,
                                const Dataset& test_set, int stage1_bits, double stage1_lr) {
  if (base.epochs < 4)
    throw ConfigError("three-stage protocol: needs at least 4 epochs to form stages");
  if (!(stage1_lr > 0.0)) throw ConfigError("three-stage protocol: stage 1 lr must be positive");
  if (stage1_bits < 2 || stage1_bits > 32)
    throw ConfigError("three-stage protocol: stage 1 bits must be in [2, 32]");
  int half = base.epochs / 2;
  int three_quarters = (3 * base.epochs) / 4;
  Trainer trainer(base, train_set, test_set);
  for (int t = 0; t < base.epochs; ++t) {
    if (t < half)
      trainer.run_epoch_at(stage1_bits, stage1_bits, stage1_lr);
    else if (t < three_quarters)
      trainer.run_epoch_at(32, 32, 0.01);
    else
      trainer.run_epoch_at(32, 32, 0.001);
  }
  return trainer.evaluate(test_set, 32);
}

}  // namespace cpt
