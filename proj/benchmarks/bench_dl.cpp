#include <benchmark/benchmark.h>

#include <perdl/dl.hpp>
#include <perdl/synthgen.hpp>

namespace {

struct Fixture {
  perdl::GroundTruth gt;
  Fixture(int dim, int samples) {
    perdl::SynthConfig cfg;
    cfg.num_clients = 1;
    cfg.dim = dim;
    cfg.atoms_per_client = dim;
    cfg.global_atoms = dim / 2;
    cfg.samples_per_client = samples;
    cfg.seed = 5;
    gt = perdl::generate_ground_truth(cfg);
  }
};

void BM_step_orthogonal(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  perdl::Dictionary d = f.gt.client_dictionary(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        perdl::step_orthogonal(f.gt.data[0], d, 0.15).dictionary.num_atoms());
  }
}
BENCHMARK(BM_step_orthogonal)->Args({6, 200})->Args({32, 1000})->Args({64, 1600});

void BM_step_general(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  perdl::Dictionary d = f.gt.client_dictionary(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        perdl::step_general(f.gt.data[0], d, 0.15, 0.0, true).dictionary.num_atoms());
  }
}
BENCHMARK(BM_step_general)->Args({6, 200})->Args({32, 1000})->Args({64, 1600});

void BM_warm_start(benchmark::State& state) {
  Fixture f(6, 200);
  perdl::WarmStartConfig warm;
  warm.seed = 3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        perdl::warm_start(f.gt.data[0], warm, perdl::DlAlgorithm{}, 6).num_atoms());
  }
}
BENCHMARK(BM_warm_start);

}  // namespace
