#include <benchmark/benchmark.h>

#include <vector>

#include "avsd/signal.hpp"
#include "avsd/toy_lm.hpp"
#include "avsd/trainer.hpp"

using namespace avsd;

namespace {

ViewFamily family(Rng& rng, std::size_t n, std::size_t m) {
  std::vector<LogDist> views;
  for (std::size_t k = 0; k < m; ++k) {
    Vec z(static_cast<Eigen::Index>(n));
    for (auto& x : z) x = 2.0 * standard_normal(rng);
    views.push_back(LogDist::from_logits(z));
  }
  return ViewFamily(std::move(views));
}

void BM_Pool(benchmark::State& state) {
  Rng rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = static_cast<std::size_t>(state.range(1));
  const auto fam = family(rng, n, m);
  const auto p = family(rng, n, 1).views()[0];
  for (auto _ : state) benchmark::DoNotOptimize(pool(p, fam));
}
BENCHMARK(BM_Pool)->Args({20, 3})->Args({32, 5})->Args({1024, 3});

void BM_ForwardBackward(benchmark::State& state) {
  Rng rng(2);
  const ToyLMConfig cfg{20, 16, 128, 16};
  const auto params = ToyLMParams::random(cfg, rng);
  std::vector<Token> prefix{kBos};
  for (int i = 0; i < 20; ++i) prefix.push_back(static_cast<Token>(uniform_index(rng, cfg.vocab)));
  Vec dz = Vec::Ones(cfg.vocab);
  for (auto _ : state) benchmark::DoNotOptimize(backward(params, prefix, dz));
}
BENCHMARK(BM_ForwardBackward);

void BM_TrainStep(benchmark::State& state) {
  TrainConfig cfg;
  cfg.pretrain.steps = 0;
  cfg.method = state.range(0) == 0 ? Method::avsd : Method::opsd;
  if (cfg.method == Method::opsd) cfg.views_used = {ViewKind::full_solution};
  const auto params = base_model(cfg);
  const auto batch = training_batch(cfg, 0);
  for (auto _ : state) benchmark::DoNotOptimize(train_step(params, batch, cfg, 7));
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
