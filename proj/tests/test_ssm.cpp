#include "doctest.h"
#include "fixtures.hpp"

#include <set>

using namespace mrf;

TEST_CASE("1D stencil: tridiagonal with wraparound, rows sum to one") {
  AdvectionDiffusionParams p;
  const auto m = build_1d_advection_diffusion(p);
  const Matrix A(m.A(1));
  CHECK(A(5, 5) == doctest::Approx(0.2));
  CHECK(A(5, 6) == doctest::Approx(0.3));
  CHECK(A(5, 4) == doctest::Approx(0.5));
  CHECK(A(0, 79) == doctest::Approx(0.5));
  CHECK(A(79, 0) == doctest::Approx(0.3));
  CHECK((A.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-14);
  CHECK(m.A(1).nonZeros() == 3 * 80);
  p.diffusion = 0.6;
  CHECK_THROWS_AS(build_1d_advection_diffusion(p), Error);
}

TEST_CASE("2D stencil: five points, reflecting boundary keeps mass") {
  AdvectionDiffusionParams p;
  p.nx = 6;
  p.ny = 5;
  p.diffusion = 0.2;
  p.advection = 0.1;
  p.advection_y = 0.1;
  p.kernel.metric = Metric::Euclidean;
  const auto m = build_2d_advection_diffusion(p);
  const Matrix A(m.A(1));
  CHECK((A.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-14);
  for (Index i = 0; i < A.rows(); ++i) CHECK((A.row(i).array() != 0.0).count() <= 5);
  CHECK(A(0, 0) == doctest::Approx(1.0 - 0.8 + 0.25 + 0.25));
  p.diffusion = 0.3;
  CHECK_THROWS_AS(build_2d_advection_diffusion(p), Error);
}

TEST_CASE("random selection observes distinct points and is redrawn per t") {
  AdvectionDiffusionParams p;
  const auto m = build_1d_advection_diffusion(p);
  const auto o1 = m.obs(1), o1b = m.obs(1), o2 = m.obs(2);
  CHECK(o1.size() == 24);
  CHECK(Matrix(o1.R) == 0.05 * Matrix::Identity(24, 24));
  std::set<Index> cols;
  for (Index c = 0; c < o1.H.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(o1.H, c); it; ++it) {
      CHECK(it.value() == 1.0);
      cols.insert(c);
    }
  CHECK(cols.size() == 24);
  CHECK(Matrix(o1.H) == Matrix(o1b.H));
  CHECK(Matrix(o1.H) != Matrix(o2.H));
}

TEST_CASE("scalar model declares its structure only on request") {
  const MaternKernel k{0.5, 0.3, 1.0, Metric::Euclidean};
  const auto plain = build_scalar_evolution(20, 0.9, k, 0.05, 0.5, 1, false);
  const auto fast = build_scalar_evolution(20, 0.9, k, 0.05, 0.5, 1, true);
  CHECK(!plain.scalar_evolution);
  REQUIRE(fast.scalar_evolution);
  CHECK(*fast.scalar_evolution == 0.9);
  CHECK(Matrix(plain.A(3)) == 0.9 * Matrix::Identity(20, 20));
  CHECK(plain.innovation == nullptr);
}

TEST_CASE("truth simulation is reproducible and has the right noise level") {
  AdvectionDiffusionParams p;
  const auto m = build_1d_advection_diffusion(p);
  const auto a = simulate_truth(m, 5, 42), b = simulate_truth(m, 5, 42), c = simulate_truth(m, 5, 43);
  for (int t = 0; t <= 5; ++t) CHECK(a.x[static_cast<size_t>(t)] == b.x[static_cast<size_t>(t)]);
  CHECK(a.x[3] != c.x[3]);

  // Monte Carlo: y - Hx has variance σ_v², x_0 has covariance Σ0
  const auto small = build_scalar_evolution(6, 1.0, MaternKernel{0.5, 0.3, 1.0, Metric::Euclidean}, 0.05, 1.0, 3,
                                            false);
  const Matrix S0 = small.sigma0->dense();
  Matrix acc = Matrix::Zero(6, 6);
  double res2 = 0.0;
  const int reps = 4000;
  for (int r = 0; r < reps; ++r) {
    const auto tr = simulate_truth(small, 1, static_cast<std::uint64_t>(r) + 1000);
    acc += tr.x[0] * tr.x[0].transpose();
    res2 += (tr.y[1] - tr.obs[1].H * tr.x[1]).squaredNorm();
  }
  acc /= reps;
  CHECK((acc - S0).cwiseAbs().maxCoeff() < 0.1);
  CHECK(res2 / (reps * 6.0) == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("locality checks") {
  AdvectionDiffusionParams p;
  const auto m = build_1d_advection_diffusion(p);
  const auto tree = fx::fig1_tree();
  const auto rep = check_evolution_locality(*tree, m.A(1), 3, 2);
  CHECK(rep.ok);
  CHECK(rep.max_row_nnz == 3);
  const SparseMatrix dense = Matrix::Constant(80, 80, 0.01).sparseView();
  CHECK(!check_evolution_locality(*tree, dense, 3, 2).ok);
  CHECK(check_observation_locality(*tree, m.obs(1)).ok);
  Observation bad;
  bad.H = SparseMatrix(1, 80);
  bad.H.insert(0, 0) = 0.5;
  bad.H.insert(0, 40) = 0.5;
  bad.R = fx::identity(1);
  CHECK(!check_observation_locality(*tree, bad).ok);
}

TEST_CASE("sampling factor handles singular PSD input") {
  Vector v(3);
  v << 1.0, 2.0, 3.0;
  const Matrix cov = v * v.transpose();
  const Matrix L = sampling_factor(cov, "cov");
  CHECK((L * L.transpose() - cov).cwiseAbs().maxCoeff() < 1e-10);
  Matrix neg = Matrix::Identity(2, 2);
  neg(1, 1) = -1.0;
  CHECK_THROWS_AS(sampling_factor(neg, "neg"), NotPositiveDefinite);
}
