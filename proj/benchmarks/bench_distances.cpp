#include <benchmark/benchmark.h>

#include <perdl/distances.hpp>
#include <perdl/rng.hpp>
#include <perdl/synthgen.hpp>

namespace {

void BM_dist12(benchmark::State& state) {
  const int r = static_cast<int>(state.range(0));
  perdl::SplitMix64 rng(42);
  perdl::Dictionary d1 = perdl::random_unit_dictionary(2 * r, r, rng);
  perdl::Dictionary d2 = perdl::random_unit_dictionary(2 * r, r, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(perdl::dist_12(d1, d2).value);
  }
}
BENCHMARK(BM_dist12)->RangeMultiplier(2)->Range(4, 64);

void BM_vector_d2(benchmark::State& state) {
  perdl::SplitMix64 rng(7);
  Eigen::VectorXd a = perdl::gaussian_matrix(64, 1, rng).col(0).normalized();
  Eigen::VectorXd b = perdl::gaussian_matrix(64, 1, rng).col(0).normalized();
  for (auto _ : state) {
    benchmark::DoNotOptimize(perdl::vector_d2(a, b));
  }
}
BENCHMARK(BM_vector_d2);

void BM_estimate_beta(benchmark::State& state) {
  const int clients = static_cast<int>(state.range(0));
  perdl::SplitMix64 rng(11);
  std::vector<perdl::Dictionary> locals;
  for (int i = 0; i < clients; ++i) {
    locals.push_back(perdl::random_unit_dictionary(16, 4, rng));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(perdl::estimate_beta(locals));
  }
}
BENCHMARK(BM_estimate_beta)->Arg(4)->Arg(16)->Arg(64);

}  // namespace
