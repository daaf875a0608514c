#include <random>
#include <vector>

#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "adl/heads.hpp"
#include "adl/losses.hpp"
#include "adl/metrics.hpp"
#include "adl/noise_synth.hpp"
#include "adl/reweighting.hpp"

namespace {

std::vector<double> uniform(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

void BM_WeightsAlpha(benchmark::State& state) {
  const auto L = uniform(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(adl::weights_alpha(L, 0.1, 0.1));
}
BENCHMARK(BM_WeightsAlpha)->Arg(16)->Arg(256);

void BM_WeightsKl(benchmark::State& state) {
  const auto L = uniform(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(adl::weights_kl(L, 0.1));
}
BENCHMARK(BM_WeightsKl)->Arg(16)->Arg(256);

void BM_AucRoc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto s = uniform(n, 3);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i % 3 == 0;
  for (auto _ : state) benchmark::DoNotOptimize(adl::metrics::auc_roc(s, y));
}
BENCHMARK(BM_AucRoc)->Arg(1000)->Arg(100000);

void BM_AucPr(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto s = uniform(n, 4);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i % 3 == 0;
  for (auto _ : state) benchmark::DoNotOptimize(adl::metrics::auc_pr(s, y));
}
BENCHMARK(BM_AucPr)->Arg(1000)->Arg(100000);

void BM_PerlinMask(benchmark::State& state) {
  const auto size = state.range(0);
  adl::Rng rng(5);
  const adl::synth::BlendSpec spec;
  for (auto _ : state) benchmark::DoNotOptimize(adl::synth::generate_perlin_mask(size, size, rng, spec));
}
BENCHMARK(BM_PerlinMask)->Arg(64)->Arg(224)->Unit(benchmark::kMillisecond);

void BM_TopK(benchmark::State& state) {
  torch::manual_seed(0);
  auto scores = torch::rand({16, state.range(0)});
  for (auto _ : state) benchmark::DoNotOptimize(adl::topk_score(scores, 0.1));
}
BENCHMARK(BM_TopK)->Arg(784)->Arg(3136);

void BM_KMeansTargets(benchmark::State& state) {
  const auto s = uniform(static_cast<std::size_t>(state.range(0)), 6);
  std::vector<int> y(s.size(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(adl::losses::kmeans_soft_targets(s, y));
}
BENCHMARK(BM_KMeansTargets)->Arg(16)->Arg(1024);

}  // namespace
BENCHMARK_MAIN();
