#include <benchmark/benchmark.h>

#include "chstep/diagnostics.hpp"
#include "chstep/io.hpp"
#include "chstep/kernels.hpp"
#include "chstep/meshing.hpp"
#include "chstep/schemes.hpp"

namespace {

using namespace chstep;

ModelParams model(int m) {
  ModelParams p;
  p.points = m;
  return p;
}

void BM_Laplacian(benchmark::State& state) {
  const Grid g = model(static_cast<int>(state.range(0))).grid();
  const SpectralOps ops(g);
  const Field phi = random_initial_field(g, 1, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(ops.laplacian(phi));
  state.SetItemsProcessed(state.iterations() * g.points() * g.points());
}
BENCHMARK(BM_Laplacian)->Arg(64)->Arg(128)->Arg(256);

void BM_Bdf2Step(benchmark::State& state) {
  const CahnHilliardSolver solver(model(static_cast<int>(state.range(0))));
  const Field older = random_initial_field(solver.grid(), 2, 0.5);
  const Field old = solver.bdf1_step(older, 1e-2, 0.0).phi;
  int iterations = 0;
  for (auto _ : state) {
    const StepResult r = solver.bdf2_step(old, older, 1e-2, 2e-2, 0.0);
    iterations = r.iterations;
    benchmark::DoNotOptimize(r.phi.data());
  }
  state.counters["fp_iters"] = iterations;
}
BENCHMARK(BM_Bdf2Step)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Energy(benchmark::State& state) {
  const ModelParams p = model(128);
  const SpectralOps ops(p.grid());
  const Field phi = random_initial_field(p.grid(), 3, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(energy(ops, p, phi));
}
BENCHMARK(BM_Energy);

void BM_KernelTable(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const TimeMesh mesh = bounded_ratio_mesh(1.0, n, 4.0, 4);
  for (auto _ : state) benchmark::DoNotOptimize(KernelTable(mesh, n).theta(n, 2));
}
BENCHMARK(BM_KernelTable)->Arg(100)->Arg(500)->Arg(2000);

void BM_CertifyMesh(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const TimeMesh mesh = bounded_ratio_mesh(1.0, n, 4.0, 5);
  const StabilityConstants c = stability_constants(4.0);
  for (auto _ : state) benchmark::DoNotOptimize(certify_mesh(mesh, c).lambda_min);
}
BENCHMARK(BM_CertifyMesh)->Arg(500)->Arg(5000);

}  // namespace

BENCHMARK_MAIN();
