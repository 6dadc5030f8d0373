// Microbenchmarks for the hot paths of the training loop: the two MAC
// kernels, the quantizers, schedule evaluation and a full train step.

#include "cpt/autodiff.hpp"
#include "cpt/dataset.hpp"
#include "cpt/model.hpp"
#include "cpt/quantize.hpp"
#include "cpt/rng.hpp"
#include "cpt/schedule.hpp"
#include "cpt/tensor.hpp"
#include "cpt/train.hpp"

#include <benchmark/benchmark.h>

namespace {

cpt::Tensor random_tensor(std::vector<std::int64_t> shape, cpt::Rng& rng) {
  cpt::Tensor t = cpt::Tensor::zeros(std::move(shape));
  for (double& v : t.values()) v = rng.normal();
  return t;
}

void BM_matmul(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  cpt::Rng rng(1);
  const cpt::Tensor a = random_tensor({n, n}, rng);
  const cpt::Tensor b = random_tensor({n, n}, rng);
  for (auto _ : state) {
    cpt::Tape tp;
    const cpt::Var va = tp.leaf(a, false);
    const cpt::Var vb = tp.leaf(b, false);
    benchmark::DoNotOptimize(tp.value(cpt::matmul(tp, va, vb)).data());
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_conv2d(benchmark::State& state) {
  cpt::Rng rng(1);
  const cpt::Tensor x = random_tensor({8, 16, 16, 16}, rng);
  const cpt::Tensor w = random_tensor({32, 16, 3, 3}, rng);
  for (auto _ : state) {
    cpt::Tape tp;
    const cpt::Var vx = tp.leaf(x, false);
    const cpt::Var vw = tp.leaf(w, false);
    benchmark::DoNotOptimize(tp.value(cpt::conv2d(tp, vx, vw, 1, 1)).data());
  }
}
BENCHMARK(BM_conv2d);

void BM_quantize_max_scale(benchmark::State& state) {
  cpt::Rng rng(1);
  const cpt::Tensor x = random_tensor({1 << 16}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        cpt::quantize_max_scale(x, static_cast<int>(state.range(0)), true,
                                cpt::Rounding::nearest_even, nullptr)
            .data());
  }
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_quantize_max_scale)->Arg(3)->Arg(8);

void BM_quantize_dorefa(benchmark::State& state) {
  cpt::Rng rng(1);
  const cpt::Tensor x = random_tensor({1 << 16}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cpt::quantize_dorefa(x, 3).data());
  }
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_quantize_dorefa);

void BM_bits_at(benchmark::State& state) {
  cpt::PrecisionSchedule s;
  s.b_min = 3;
  s.b_max = 8;
  s.total_epochs = 160;
  s.num_cycles = 8;
  int t = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cpt::bits_at(s, t));
    t = (t + 1) % s.total_epochs;
  }
}
BENCHMARK(BM_bits_at);

void BM_train_step_cnn6(benchmark::State& state) {
  cpt::Rng data_rng(7);
  const cpt::Dataset ds = cpt::make_synthetic_digits(256, 0.15, data_rng);

  cpt::TrainOptions opt;
  opt.input_shape = ds.example_shape;
  opt.layers = cpt::preset_layers("cnn6", opt.input_shape, 10);
  opt.epochs = 1;
  opt.batch_size = 32;
  opt.fw.total_epochs = 1;
  opt.fw.num_cycles = 1;
  opt.lr.boundaries = {1};
  opt.lr.lrs = {0.05};
  cpt::Trainer trainer(opt, ds, ds);
  for (auto _ : state) {
    benchmark::DoNotOptimize(&trainer.run_epoch_at(4, 8, 0.05));
  }
  state.SetItemsProcessed(state.iterations() * ds.size());
}
BENCHMARK(BM_train_step_cnn6)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
