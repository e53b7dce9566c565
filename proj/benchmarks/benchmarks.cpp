#include <benchmark/benchmark.h>

#include "polyscal/complex.hpp"

namespace {

void BM_subdivide_torus(benchmark::State& state) {
  polyscal::SimplicialLengthComplex torus = polyscal::make_flat_torus();
  int levels = static_cast<int>(state.range(0));
  for (auto _ : state) {
    polyscal::SimplicialLengthComplex z = polyscal::subdivide(torus, levels);
    benchmark::DoNotOptimize(z.total_measure());
  }
}
BENCHMARK(BM_subdivide_torus)->Arg(3)->Arg(5);

}  // namespace

BENCHMARK_MAIN();
