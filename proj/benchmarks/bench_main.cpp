// Throughput of the hot paths: basis evaluation, the index fit, effect
// estimation, cross-validation and the bootstrap link curve.

#include "sieveate/effects.hpp"
#include "sieveate/hermite.hpp"
#include "sieveate/index_mle.hpp"
#include "sieveate/link_curve.hpp"
#include "sieveate/simulation.hpp"
#include "sieveate/truncation_cv.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace sieveate;

Dataset sample(const char* id, long n) {
  return sim::generate_dataset(sim::setting(id), n, 12345).data;
}

void BM_EvalBasis(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  double w = -3.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(hermite::eval_basis(w, k));
    w = w > 3.0 ? -3.0 : w + 1e-3;
  }
}
BENCHMARK(BM_EvalBasis)->Arg(3)->Arg(8)->Arg(16);

void BM_FitSingleIndex(benchmark::State& state) {
  const auto data = sample("5A", state.range(0));
  const int k = default_k(data.size());
  for (auto _ : state) benchmark::DoNotOptimize(fit_single_index(data, k));
  state.SetItemsProcessed(state.iterations() * data.size());
}
BENCHMARK(BM_FitSingleIndex)->Arg(400)->Arg(1600)->Arg(6400)->Unit(benchmark::kMillisecond);

void BM_FitSixCovariates(benchmark::State& state) {
  const auto data = sample("5C", state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit_single_index(data, default_k(data.size())));
}
BENCHMARK(BM_FitSixCovariates)->Arg(400)->Arg(1600)->Unit(benchmark::kMillisecond);

void BM_EstimateEffects(benchmark::State& state) {
  const auto data = sample("5A", state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_effects(data, KPolicy::default_rule()));
}
BENCHMARK(BM_EstimateEffects)->Arg(400)->Arg(1600)->Unit(benchmark::kMillisecond);

void BM_SelectK(benchmark::State& state) {
  const auto data = sample("5A", state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(select_k(data, {2, 3, 4, 5, 6}, CvMode::TreatmentPrediction, 10, {}, 1));
}
BENCHMARK(BM_SelectK)->Arg(400)->Arg(1600)->Unit(benchmark::kMillisecond);

void BM_LinkCurve(benchmark::State& state) {
  const auto data = sample("8A", 800);
  const auto model = fit_single_index(data, 3);
  BootstrapOptions boot;
  boot.replications = static_cast<int>(state.range(0));
  boot.seed = 7;
  for (auto _ : state) benchmark::DoNotOptimize(link_curve(data, model, default_grid(data, model, 101), boot));
}
BENCHMARK(BM_LinkCurve)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
