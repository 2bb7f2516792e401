#include <benchmark/benchmark.h>

#include "cmtssl/difficulty.hpp"
#include "cmtssl/rng.hpp"

using namespace cmtssl;

namespace {

Tensor random_cube(int h, int w, int c, std::uint64_t seed) {
  Tensor cube({h, w, c});
  Rng rng(seed);
  for (std::size_t i = 0; i < cube.size(); ++i) cube[i] = rng.normal(0.0, 1.0);
  return cube;
}

}  // namespace

static void bm_difficulty_16x16(benchmark::State& state) {
  const Tensor cube = random_cube(16, 16, static_cast<int>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(difficulty_score(cube, Aggregation::average));
  }
}
BENCHMARK(bm_difficulty_16x16)->Arg(32)->Arg(103)->Arg(120);

static void bm_gradient_fields(benchmark::State& state) {
  const Tensor cube = random_cube(16, 16, static_cast<int>(state.range(0)), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gradient_fields(cube));
  }
}
BENCHMARK(bm_gradient_fields)->Arg(32)->Arg(120);

BENCHMARK_MAIN();
