// Block-structured kernels against the serial dense / generic-sparse versions.
// The argument is the 1D grid size; trees use M = 3, r = 2 and J^3 >= n/2.

#include "mrf/blocksparse.hpp"
#include "mrf/filter.hpp"
#include "mrf/mrd.hpp"
#include "mrf/partition.hpp"
#include "mrf/reference.hpp"
#include "mrf/ssm.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace mrf;

namespace {

struct Fixture {
  StateSpaceModel model;
  TreePtr tree;
  FilterMoments prior;
  Observation obs;
  Vector y;
  ObservationBlocks blocks;
};

Fixture make(Index n) {
  AdvectionDiffusionParams p;
  p.nx = n;
  Fixture f;
  f.model = build_1d_advection_diffusion(p);
  PartitionConfig c;
  c.levels = 3;
  c.knots = {2};
  c.children = {static_cast<int>(std::ceil(std::cbrt(static_cast<double>(n) / 2.0)))};
  f.tree = build_partition(f.model.grid, c);
  const Trajectory tr = simulate_truth(f.model, 1, 1);
  f.prior = mrf_predict(f.model, mrf_initialize(f.model, f.tree), 1);
  f.obs = tr.obs[1];
  f.y = tr.y[1];
  f.blocks = split_observations(*f.tree, f.tree->cols_to_internal(f.obs.H), f.obs.R);
  return f;
}

void BM_mrd_block(benchmark::State& st) {
  const Fixture f = make(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(mrd(*f.model.sigma0, f.tree));
}

void BM_mrd_reference(benchmark::State& st) {
  const Fixture f = make(st.range(0));
  const Matrix S = f.model.sigma0->dense();
  for (auto _ : st) benchmark::DoNotOptimize(reference::mrd(S, f.tree));
}

void BM_cholesky_block(benchmark::State& st) {
  const Fixture f = make(st.range(0));
  const auto lambda = build_lambda(f.prior.B, f.blocks);
  for (auto _ : st) benchmark::DoNotOptimize(cholesky_and_invert(lambda));
}

void BM_cholesky_reference(benchmark::State& st) {
  const Fixture f = make(st.range(0));
  const SparseMatrix lower = build_lambda(f.prior.B, f.blocks).to_sparse_lower();
  for (auto _ : st) benchmark::DoNotOptimize(reference::cholesky_and_invert(lower));
}

void BM_posterior_factor_block(benchmark::State& st) {
  const Fixture f = make(st.range(0));
  const auto chol = cholesky_and_invert(build_lambda(f.prior.B, f.blocks));
  for (auto _ : st) benchmark::DoNotOptimize(apply_inverse_transpose(f.prior.B, chol.Linv));
}

void BM_posterior_factor_reference(benchmark::State& st) {
  const Fixture f = make(st.range(0));
  const auto chol = reference::cholesky_and_invert(build_lambda(f.prior.B, f.blocks).to_sparse_lower());
  for (auto _ : st) benchmark::DoNotOptimize(reference::apply_inverse_transpose(f.prior.B, chol.Linv));
}

void BM_filter_step(benchmark::State& st) {
  const Fixture f = make(st.range(0));
  const FilterMoments init = mrf_initialize(f.model, f.tree);
  for (auto _ : st) benchmark::DoNotOptimize(mrf_step(f.model, init, f.obs, f.y, 1));
}

}  // namespace

BENCHMARK(BM_mrd_block)->Arg(200)->Arg(400)->Arg(800)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mrd_reference)->Arg(200)->Arg(400)->Arg(800)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_cholesky_block)->Arg(200)->Arg(400)->Arg(800)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_cholesky_reference)->Arg(200)->Arg(400)->Arg(800)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_posterior_factor_block)->Arg(200)->Arg(400)->Arg(800)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_posterior_factor_reference)->Arg(200)->Arg(400)->Arg(800)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_filter_step)->Arg(200)->Arg(400)->Arg(800)->Arg(1600)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
