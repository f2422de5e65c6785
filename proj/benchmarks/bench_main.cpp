#include <algorithm>
#include <vector>

#include <benchmark/benchmark.h>

#include "denoise/bmm.hpp"
#include "denoise/data.hpp"
#include "denoise/model.hpp"
#include "denoise/noise.hpp"
#include "denoise/rng.hpp"
#include "denoise/synth.hpp"
#include "denoise/training.hpp"

namespace {

using namespace denoise;

std::vector<double> mixture_sample(std::size_t n) {
  Rng rng(1);
  std::vector<double> l(n);
  for (double& x : l) {
    x = rng.uniform01() < 0.6 ? rng.beta(2, 8) : rng.beta(8, 2);
    x = std::clamp(x, kLossClampEps, 1.0 - kLossClampEps);
  }
  return l;
}

void BM_FitBmm(benchmark::State& state) {
  const auto l = mixture_sample(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_bmm(l));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitBmm)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_PosteriorClean(benchmark::State& state) {
  BetaMixture m;
  m.lambda_c = 0.6;
  m.lambda_n = 0.4;
  m.alpha_c = 2;
  m.beta_c = 8;
  m.alpha_n = 8;
  m.beta_n = 2;
  double l = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(posterior_clean(m, l));
    l = l > 0.98 ? 0.01 : l + 0.013;
  }
}
BENCHMARK(BM_PosteriorClean);

void BM_ForwardBackward(benchmark::State& state) {
  const auto rep = static_cast<RepMode>(state.range(0));
  Rng rng(2);
  const auto cls = ClassifierParams::random(2000, 50, 128, 6, 0.3, rng);
  const auto head = NoiseHeadParams::random(representation_width(rep, 128, 6), 6, rng);
  auto gc = ClassifierGrads::zeros(2000, 50, 128, 6);
  auto gn = NoiseHeadGrads::zeros(head.input_width(), 6);
  std::vector<std::int32_t> tokens = {5, 17, 300, 42, 1999, 8, 77, 1024, 3, 11};
  for (auto _ : state) {
    const auto trace = forward(cls, &head, tokens, ForwardMode::kTrain, rep, &rng);
    benchmark::DoNotOptimize(backward(cls, head, trace, 2, 4.0, 0.7, LossVariant::kSoft, gc, gn));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(static_cast<int>(RepMode::kLogits))->Arg(static_cast<int>(RepMode::kConcat));

void BM_InjectRandom(benchmark::State& state) {
  SynthOptions o;
  const auto ds = parse_dataset(make_question_corpus(o), DataFormat::kTrec);
  for (auto _ : state) benchmark::DoNotOptimize(inject_random(ds, 0.4, 3));
}
BENCHMARK(BM_InjectRandom)->Unit(benchmark::kMillisecond);

// One warmup epoch plus loss recording over a TREC-sized corpus.
void BM_WarmupEpoch(benchmark::State& state) {
  SynthOptions train_opts;
  SynthOptions test_opts;
  test_opts.count = 500;
  test_opts.seed = 2;
  auto parts = split_validation(parse_dataset(make_question_corpus(train_opts), DataFormat::kTrec), 0.092, 7);
  const auto data = prepare_data(inject_random(parts.train, 0.4, 1).dataset, parts.validation,
                                 parse_dataset(make_question_corpus(test_opts), DataFormat::kTrec));
  TrainConfig cfg;
  cfg.t0 = 1;
  cfg.epochs = 2;
  for (auto _ : state) {
    Trainer t(cfg, data);
    benchmark::DoNotOptimize(t.run_warmup());
  }
}
BENCHMARK(BM_WarmupEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
