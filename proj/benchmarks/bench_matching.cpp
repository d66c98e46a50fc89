#include <benchmark/benchmark.h>

#include <perdl/matching.hpp>
#include <perdl/rng.hpp>
#include <perdl/synthgen.hpp>

namespace {

std::vector<perdl::Dictionary> layer_fixture(int n, int r) {
  perdl::SplitMix64 rng(123);
  std::vector<perdl::Dictionary> dicts;
  for (int i = 0; i < n; ++i) {
    dicts.push_back(perdl::random_unit_dictionary(16, r, rng));
  }
  return dicts;
}

void BM_build_dag(benchmark::State& state) {
  auto dicts = layer_fixture(static_cast<int>(state.range(0)),
                             static_cast<int>(state.range(1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(perdl::build_dag(dicts).edge_count());
  }
}
BENCHMARK(BM_build_dag)->Args({4, 16})->Args({16, 16})->Args({62, 32});

void BM_global_matching(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int r = static_cast<int>(state.range(1));
  auto dicts = layer_fixture(n, r);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        perdl::global_matching(dicts, r / 2, true).relaxations);
  }
}
BENCHMARK(BM_global_matching)
    ->Args({4, 8})
    ->Args({10, 6})
    ->Args({10, 32})
    ->Args({62, 16});

}  // namespace
