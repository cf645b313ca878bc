#include <benchmark/benchmark.h>

#include "pac2/bounds.hpp"

namespace {

void BM_grid_minimize_jensen2(benchmark::State& state) {
  const pac2::DiscreteToyModel toy = pac2::reference_toy();
  for (auto _ : state) {
    benchmark::DoNotOptimize(pac2::grid_minimize(pac2::jensen2_bound, toy, 1e-3));
  }
}

void BM_exact_update_to_fixed_point(benchmark::State& state) {
  const pac2::DiscreteToyModel toy = pac2::reference_toy();
  const std::vector<int> data = pac2::sample_outcomes(toy, 50, 9);
  const pac2::DiscreteMixture uniform{{0.5, 0.5}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(pac2::iterate_pac2_update(toy, data, uniform));
  }
}

}  // namespace

BENCHMARK(BM_grid_minimize_jensen2);
BENCHMARK(BM_exact_update_to_fixed_point);
