#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "survbal/acquisition.hpp"
#include "survbal/budget_select.hpp"
#include "survbal/metrics.hpp"

using namespace survbal;

namespace {

ClassMatrix random_rows(std::mt19937_64& rng, Eigen::Index samples, Eigen::Index classes) {
  std::gamma_distribution<double> g(1.0, 1.0);
  ClassMatrix m(samples, classes);
  for (Eigen::Index s = 0; s < samples; ++s) {
    for (Eigen::Index c = 0; c < classes; ++c) m(s, c) = g(rng);
    m.row(s) /= m.row(s).sum();
  }
  return m;
}

std::vector<ClassMatrix> candidates(std::size_t n, Eigen::Index samples, Eigen::Index classes) {
  std::mt19937_64 rng(42);
  std::vector<ClassMatrix> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_rows(rng, samples, classes));
  return out;
}

void BM_BatchMiExact(benchmark::State& state) {
  const auto rows = candidates(static_cast<std::size_t>(state.range(0)), 50, 4);
  MiOptions o;
  o.mode = MiMode::Exact;
  for (auto _ : state) benchmark::DoNotOptimize(batch_mutual_information(rows, o));
}
BENCHMARK(BM_BatchMiExact)->DenseRange(1, 6);

void BM_OracleGain(benchmark::State& state) {
  const auto pool = candidates(200, 50, 4);
  MiOptions o;
  BatchMiOracle oracle(pool, o);
  for (std::size_t i = 0; i < static_cast<std::size_t>(state.range(0)); ++i) oracle.commit(i);
  std::size_t c = 199;
  for (auto _ : state) benchmark::DoNotOptimize(oracle.gain(c));
}
BENCHMARK(BM_OracleGain)->Arg(0)->Arg(2)->Arg(5)->Arg(10);

void BM_GreedySelect(benchmark::State& state) {
  const auto pool = candidates(300, 50, 4);
  const std::vector<double> costs(pool.size(), 1.0);
  GreedyOptions g;
  g.lazy = state.range(1) != 0;
  for (auto _ : state) {
    BatchMiOracle oracle(pool, MiOptions{});
    benchmark::DoNotOptimize(greedy_ratio(oracle, costs, static_cast<double>(state.range(0)), g));
  }
}
BENCHMARK(BM_GreedySelect)->Args({5, 0})->Args({5, 1})->Args({10, 0})->Args({10, 1})->Unit(benchmark::kMillisecond);

void BM_PseudoObservations(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> ex(0.3);
  std::bernoulli_distribution ev(0.6);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> t(n);
  std::vector<char> e(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = ex(rng);
    e[i] = ev(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(pseudo_observations(t, e));
}
BENCHMARK(BM_PseudoObservations)->Arg(100)->Arg(500)->Arg(2000);

}  // namespace
BENCHMARK_MAIN();
