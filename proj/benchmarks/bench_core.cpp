#include <benchmark/benchmark.h>

#include <random>

#include "siprop/geometry.hpp"
#include "siprop/inference.hpp"
#include "siprop/lasso.hpp"
#include "siprop/nuisance.hpp"
#include "siprop/simulation.hpp"
#include "siprop/truncnorm.hpp"

using namespace siprop;

namespace {

ScenarioConfig scenario(Index n, Index p) {
  ScenarioConfig cfg;
  cfg.n = n;
  cfg.p = p;
  cfg.law = CovariateLaw::Uniform01;
  cfg.f = NuisanceShape::F3;
  cfg.e = PropensityShape::E2;
  cfg.mu = EffectShape::M2;
  cfg.lambda_multiplier = 2.0;
  return cfg;
}

void BM_LassoSolve(benchmark::State& state) {
  const auto cfg = scenario(state.range(0), state.range(1));
  const auto [ds, truth] = generate_dataset(cfg, 1);
  const WeightedOutcome wo = compute_weighted_outcome(ds.y, ds.t, *ds.e, Contrast::difference());
  const Matrix x = make_design_transform(ds.x, true, false).apply(ds.x);
  const double lambda = scenario_lambda(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(solve_ipw_lasso(x, wo.wy, lambda));
}
BENCHMARK(BM_LassoSolve)->Args({1000, 5})->Args({1000, 25})->Args({5000, 25});

void BM_TruncatedCdf(benchmark::State& state) {
  const TruncationRegion region({{-3.0, -1.0}, {0.5, 2.0}, {6.0, 40.0}});
  double x = 0.75;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tn_union_cdf(x, 0.3, 1.7, region));
    x = x < 1.9 ? x + 1e-3 : 0.75;
  }
}
BENCHMARK(BM_TruncatedCdf);

void BM_InvertMean(benchmark::State& state) {
  const TruncationRegion region({{-3.0, -1.0}, {0.5, 2.0}});
  for (auto _ : state) benchmark::DoNotOptimize(invert_mean(1.2, 0.8, region, 0.975));
}
BENCHMARK(BM_InvertMean);

void BM_SignUnionRegion(benchmark::State& state) {
  const auto cfg = scenario(1000, state.range(0));
  const auto [ds, truth] = generate_dataset(cfg, 2);
  const WeightedOutcome wo = compute_weighted_outcome(ds.y, ds.t, *ds.e, Contrast::difference());
  const Matrix x = make_design_transform(ds.x, true, false).apply(ds.x);
  const double lambda = scenario_lambda(cfg);
  const LassoFit fit = solve_ipw_lasso(x, wo.wy, lambda);
  if (fit.active.empty()) {
    state.SkipWithError("empty model");
    return;
  }
  const ModelBasis basis(x, fit.active);
  const Decomposition dec = decompose(wo.w, wo.wy, eta_vector(basis, fit.active.front()));
  state.counters["model_size"] = static_cast<double>(fit.active.size());
  for (auto _ : state) benchmark::DoNotOptimize(sign_union_region(basis, lambda, dec));
}
BENCHMARK(BM_SignUnionRegion)->Arg(5)->Arg(25);

void BM_Analyze(benchmark::State& state) {
  const auto cfg = scenario(state.range(0), state.range(1));
  const auto [ds, truth] = generate_dataset(cfg, 3);
  const AnalysisConfig acfg = scenario_analysis_config(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(analyze(ds, Contrast::difference(), acfg));
}
BENCHMARK(BM_Analyze)->Args({1000, 5})->Args({1000, 25})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
