#include <benchmark/benchmark.h>

#include <vector>

#include "mfai/mfai.hpp"

namespace {

mfai::SimTruth make_data(std::size_t n, std::size_t m, double missing) {
  mfai::SimConfig cfg;
  cfg.n = n;
  cfg.m = m;
  cfg.c = 3;
  cfg.k = 3;
  cfg.missing_ratio = missing;
  cfg.seed = 11;
  return mfai::simulate_dataset(cfg);
}

void BM_EStepDense(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto t = make_data(n, n, 0.0);
  const mfai::FactorProblem p(t.y, t.x, mfai::Route::dense);
  auto s = mfai::initialize_factor(p, {});
  for (auto _ : state) {
    mfai::e_step(p, s);
    benchmark::DoNotOptimize(s.mu.data());
  }
  state.SetComplexityN(static_cast<benchmark::IterationCount>(n * n));
}
BENCHMARK(BM_EStepDense)->Arg(250)->Arg(500)->Arg(1000)->Complexity(benchmark::oN);

void BM_EStepObserved(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto t = make_data(n, n, 0.5);
  const mfai::FactorProblem p(t.y, t.x);
  auto s = mfai::initialize_factor(p, {});
  for (auto _ : state) {
    mfai::e_step(p, s);
    benchmark::DoNotOptimize(s.mu.data());
  }
  state.SetComplexityN(static_cast<benchmark::IterationCount>(n * n));
}
BENCHMARK(BM_EStepObserved)->Arg(250)->Arg(500)->Arg(1000)->Complexity(benchmark::oN);

void BM_FitTree(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto t = make_data(n, 10, 0.0);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = t.z(static_cast<Eigen::Index>(i), 0);
  for (auto _ : state) {
    auto tree = mfai::fit_tree(t.x, y, {});
    benchmark::DoNotOptimize(tree.nodes().data());
  }
}
BENCHMARK(BM_FitTree)->Arg(200)->Arg(1000)->Arg(5000);

void BM_FitSingleFactor(benchmark::State& state) {
  const auto t = make_data(200, 200, 0.5);
  mfai::FitOptions opts;
  opts.max_iter = 20;
  for (auto _ : state) {
    auto s = mfai::fit_single_factor(t.y, t.x, opts);
    benchmark::DoNotOptimize(s.mu.data());
  }
}
BENCHMARK(BM_FitSingleFactor)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
