#include "doctest.h"
#include "fixtures.hpp"

#include "mrf/metrics.hpp"
#include "mrf/reference.hpp"

#include <omp.h>

using namespace mrf;

TEST_CASE("identity covariance factors exactly") {
  const auto t = fx::fig1_tree();
  const DenseCovariance I(Matrix::Identity(80, 80));
  const auto B = mrd(I, t);
  const Matrix BBt = B.covariance_original();
  CHECK((BBt - Matrix::Identity(80, 80)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single-region tree reproduces an arbitrary SPD matrix") {
  Rng rng(3);
  const Matrix S = fx::random_spd(30, rng);
  PartitionConfig c;
  c.levels = 0;
  c.knots = {30};
  const auto t = build_partition(fx::line_grid(30), c);
  const auto B = mrd(DenseCovariance(S), t);
  CHECK((B.covariance_original() - S).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("exponential covariance with boundary knots is exact") {
  const auto t = fx::boundary_tree();
  const auto sigma = fx::matern_line(0.5, 0.3, Metric::Euclidean);
  const auto rep = mrd_error_report(sigma, t);
  CHECK(rep.max_abs < 1e-8);
}

TEST_CASE("block pattern of B") {
  const auto t = fx::fig1_tree();
  const auto B = mrd(fx::matern_line(0.5, 0.1), t);
  const auto got = fx::pattern(B.to_dense());
  CHECK(fx::subset(got, fx::structural_pattern(B)));
  for (Index i = 0; i < 80; ++i) CHECK(B.row_nnz(i) <= t->max_support());
  CHECK(B.stored_entries() <= 80 * t->max_support());
}

TEST_CASE("fast MRD agrees with the literal W/V recursion") {
  const auto t = fx::fig1_tree();
  const auto sigma = fx::matern_line(1.5, 0.1);
  const auto fast = mrd(sigma, t);
  reference::MrdWorkspace ws;
  const auto ref = reference::mrd(sigma.dense(), t, &ws);
  CHECK((fast.to_dense() - ref.to_dense()).cwiseAbs().maxCoeff() < 1e-10);

  // V^l is W^l restricted to the knot rows
  for (const auto& r : t->regions()) {
    const auto id = static_cast<size_t>(&r - t->regions().data());
    for (size_t l = 0; l < ws.W[id].size(); ++l) {
      const Matrix& W = ws.W[id][l];
      const Matrix& V = ws.V[id][l];
      if (V.size() == 0) continue;
      for (Index a = 0; a < r.num_knots(); ++a) {
        const auto pos = std::lower_bound(r.indices.begin(), r.indices.end(), r.knots[static_cast<size_t>(a)]) -
                         r.indices.begin();
        CHECK((W.row(pos) - V.row(a)).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("entry budget of the covariance oracle") {
  const auto t = fx::fig1_tree();
  const auto sigma = fx::matern_line(0.5, 0.1);
  CountingCovariance counter(sigma);
  const auto B = mrd(counter, t);
  CHECK(counter.distinct_entries() <= 80 * t->max_support());
  const auto base = mrd(sigma, t);
  CHECK((B.to_dense() - base.to_dense()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("multi-resolution tree beats a low-rank tree with the same N") {
  for (double nu : {0.5, 1.5}) {
    const auto sigma = fx::matern_line(nu, 0.1);
    const GaussianReference exact(Vector::Zero(80), sigma.dense());
    const auto mra = mrd(sigma, fx::fig1_tree());
    const auto lrf = mrd(sigma, build_singleton_tree(fx::line_grid(80), 8));
    CHECK(kl_gaussian(exact, Vector::Zero(80), mra.covariance_original()) <
          kl_gaussian(exact, Vector::Zero(80), lrf.covariance_original()));
  }
}

TEST_CASE("dense error report refuses large n") {
  const auto t = fx::fig1_tree();
  CHECK_THROWS_AS(mrd_error_report(fx::matern_line(0.5, 0.1), t, 50), Error);
}

TEST_CASE("thread count does not change the factor") {
  const PartitionConfig c{4, {2, 4, 4, 4}, {16, 8, 6, 6, 6}};
  const auto t = build_partition(fx::square_grid(34, 34), c);
  const KernelCovariance sigma(fx::square_grid(34, 34), MaternKernel{0.5, 0.15, 0.5, Metric::Euclidean});
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto a = mrd(sigma, t);
  omp_set_num_threads(4);
  const auto b = mrd(sigma, t);
  omp_set_num_threads(saved);
  for (size_t k = 0; k < t->regions().size(); ++k)
    CHECK((a.block(static_cast<int>(k)) - b.block(static_cast<int>(k))).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("non positive definite input is reported") {
  const auto t = fx::fig1_tree();
  Matrix S = Matrix::Identity(80, 80);
  S(t->region(0).knots[0], t->region(0).knots[0]) = -1.0;
  CHECK_THROWS_AS(mrd(DenseCovariance(S), t), NotPositiveDefinite);
}
