// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "hsf/analysis.hpp"
#include "hsf/classifier.hpp"
#include "hsf/evaluation.hpp"
#include "hsf/feature.hpp"
#include "hsf/rng.hpp"

namespace {

using namespace hsf;

std::vector<float> random_tokens(std::size_t m, std::size_t n) {
  CounterRng rng(1, 0);
  std::vector<float> t(m * n);
  for (auto& v : t) v = static_cast<float>(rng.normal());
  return t;
}

void BM_AssembleFeature(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const std::size_t n = 4096;
  const auto tokens = random_tokens(8, n);
  for (auto _ : state) benchmark::DoNotOptimize(assemble_feature(tokens, n, k));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(feature_length(k, n) * sizeof(double)));
}
BENCHMARK(BM_AssembleFeature)->Arg(1)->Arg(7)->Arg(8);

// One filter decision at k = 7 for an n = 4096 model: the per-query cost
// added to inference.
void BM_Score(benchmark::State& state) {
  ClassifierConfig c;
  c.k = 7;
  c.input_dim = feature_length(c.k, static_cast<std::size_t>(state.range(0)));
  c.architecture = Architecture::Mlp1;
  const auto params = init_params(c);
  const auto tokens = random_tokens(8, static_cast<std::size_t>(state.range(0)));
  const auto f = assemble_feature(tokens, static_cast<std::size_t>(state.range(0)), c.k);
  for (auto _ : state) benchmark::DoNotOptimize(score(params, f.values));
}
BENCHMARK(BM_Score)->Arg(64)->Arg(4096)->Unit(benchmark::kMicrosecond);

void BM_RocAuc(benchmark::State& state) {
  CounterRng rng(2, 0);
  std::vector<double> s(static_cast<std::size_t>(state.range(0)));
  std::vector<int> l(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    l[i] = static_cast<int>(i % 2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(roc_auc(s, l));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_RocAuc)->RangeMultiplier(10)->Range(100, 100000)->Complexity(benchmark::oNLogN);

void BM_PcaFit(benchmark::State& state) {
  CounterRng rng(3, 0);
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix rows(400, n);
  for (std::size_t i = 0; i < rows.rows; ++i) {
    for (std::size_t j = 0; j < n; ++j) rows(i, j) = rng.normal() * (j == 0 ? 5.0 : j == 1 ? 3.0 : 1.0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(pca_fit(rows));
}
BENCHMARK(BM_PcaFit)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

// The distro benchmark_main archive carries LTO bytecode from another GCC
// release, so main is defined here.
BENCHMARK_MAIN();
