#include "doctest.h"
#include "fixtures.hpp"

#include "mrf/reference.hpp"

using namespace mrf;

namespace {

struct Setup {
  TreePtr tree = fx::fig1_tree();
  MultiResFactor B = mrd(fx::matern_line(0.5, 0.1), tree);
};

/// Random observation of a fraction of the grid, user-order H.
SparseMatrix selection(Index n, const std::vector<Index>& rows) {
  SparseMatrix H(static_cast<Index>(rows.size()), n);
  std::vector<Triplet> t;
  for (size_t k = 0; k < rows.size(); ++k) t.emplace_back(static_cast<Index>(k), rows[k], 1.0);
  H.setFromTriplets(t.begin(), t.end());
  return H;
}

SparseMatrix diag(Index m, double v) {
  SparseMatrix R(m, m);
  R.setIdentity();
  return R * v;
}

}  // namespace

TEST_CASE("dense round trip and matrix-vector products") {
  Setup s;
  const Matrix D = s.B.to_dense();
  Rng rng(11);
  const Vector v = standard_normal(D.cols(), rng);
  const Vector z = standard_normal(80, rng);
  CHECK((s.B.multiply(v) - D * v).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s.B.multiply_transpose(z) - D.transpose() * z).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s.B.implied_variance() - (D * D.transpose()).diagonal()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((Matrix(s.B.to_sparse()) - D).cwiseAbs().maxCoeff() == 0.0);
  const Matrix perm_back = s.tree->rows_to_original(D);
  CHECK((perm_back * perm_back.transpose() - s.B.covariance_original()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s.B.scaled(2.0).to_dense() - 2.0 * D).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("row panels round trip") {
  Setup s;
  MultiResFactor C(s.tree);
  for (int f : s.tree->finest()) C.set_row_panel(f, s.B.row_panel(f));
  CHECK((C.to_dense() - s.B.to_dense()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("evolve_factor matches dense A B") {
  Setup s;
  const Matrix D = s.B.to_dense();
  SparseMatrix I = fx::identity(80);
  CHECK((evolve_factor(I, s.B).to_dense() - D).cwiseAbs().maxCoeff() == 0.0);
  CHECK((evolve_factor(4.0 * I, s.B).to_dense() - 4.0 * D).cwiseAbs().maxCoeff() < 1e-14);

  Rng rng(5);
  std::vector<Triplet> trip;
  for (Index i = 0; i < 80; ++i)
    for (Index d = -1; d <= 1; ++d) trip.emplace_back(i, (i + d + 80) % 80, standard_normal(1, rng)[0]);
  SparseMatrix A(80, 80);
  A.setFromTriplets(trip.begin(), trip.end());
  const SparseMatrix Ai = s.tree->sym_to_internal(A);
  const auto bf = evolve_factor(Ai, s.B, 3);
  CHECK((bf.to_dense() - Matrix(Ai) * D).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(bf.max_row_nnz() <= 3 * s.tree->max_support());
  CHECK(std::abs(bf.row_dot(3, 7) - (Matrix(Ai) * D).row(3).dot((Matrix(Ai) * D).row(7))) < 1e-12);
}

TEST_CASE("evolve_factor warns when a row of A is too dense") {
  Setup s;
  std::vector<std::string> msgs;
  set_diagnostic_sink([&](const std::string& m) { msgs.push_back(m); });
  Matrix dense = Matrix::Constant(80, 80, 0.01);
  const SparseMatrix A = dense.sparseView();
  evolve_factor(A, s.B, 3);
  set_diagnostic_sink(nullptr);
  CHECK(!msgs.empty());
}

TEST_CASE("lambda with no data is the identity") {
  Setup s;
  const auto obs = split_observations(*s.tree, SparseMatrix(0, 80), SparseMatrix(0, 0));
  const Matrix L = build_lambda(s.B, obs).to_dense(true);
  CHECK((L - Matrix::Identity(L.rows(), L.cols())).cwiseAbs().maxCoeff() == 0.0);
  const auto chol = cholesky_and_invert(build_lambda(s.B, obs));
  CHECK((chol.L.to_dense() - Matrix::Identity(L.rows(), L.cols())).cwiseAbs().maxCoeff() == 0.0);
  CHECK((chol.Linv.to_dense() - Matrix::Identity(L.rows(), L.cols())).cwiseAbs().maxCoeff() == 0.0);
  CHECK(apply_inverse_transpose(s.B, chol.Linv).to_dense() == s.B.to_dense());
}

TEST_CASE("lambda, Cholesky and B L^-T against dense oracles") {
  Setup s;
  Rng rng(9);
  std::vector<Index> rows;
  for (Index i = 0; i < 80; i += 3) rows.push_back(i);
  const SparseMatrix H = s.tree->cols_to_internal(selection(80, rows));
  const SparseMatrix R = diag(static_cast<Index>(rows.size()), 0.05);
  const auto obs = split_observations(*s.tree, H, R);
  CHECK(obs.n_obs == static_cast<Index>(rows.size()));
  CHECK(std::abs(obs.log_det_R - static_cast<double>(rows.size()) * std::log(0.05)) < 1e-10);

  const Matrix D = s.B.to_dense();
  const Matrix Hd(H);
  const Matrix lam_oracle =
      Matrix::Identity(D.cols(), D.cols()) + D.transpose() * Hd.transpose() * (Hd * D) / 0.05;
  const auto lam = build_lambda(s.B, obs);
  const Matrix lam_d = lam.to_dense(true);
  CHECK((lam_d - lam_oracle).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((lam_d - reference::lambda_dense(s.B, H, R)).cwiseAbs().maxCoeff() < 1e-10);
  // Λ lives inside the pattern of I + B'B
  const Matrix BtB = D.transpose() * D + Matrix::Identity(D.cols(), D.cols());
  CHECK(fx::subset(fx::pattern(lam_d, 1e-14), fx::pattern(BtB, 0.0)));
  CHECK(lam.stored_entries() <= 80 * s.tree->max_support());

  const auto chol = cholesky_and_invert(lam);
  const Matrix L = chol.L.to_dense();
  const Matrix Li = chol.Linv.to_dense();
  CHECK((L * L.transpose() - lam_d).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((L * Li - Matrix::Identity(L.rows(), L.cols())).cwiseAbs().maxCoeff() < 1e-10);
  const Matrix Ldense = lam_oracle.llt().matrixL();
  CHECK((L - Ldense).cwiseAbs().maxCoeff() < 1e-10);
  // no fill-in outside the lower pattern of Λ
  CHECK(fx::subset(fx::pattern(L, 1e-13), fx::pattern(lam.to_dense(false), 0.0)));
  CHECK(fx::subset(fx::pattern(Li, 1e-13), fx::pattern(lam.to_dense(false), 0.0)));
  CHECK(std::abs(chol.log_det() - L.diagonal().array().log().sum()) < 1e-12);

  // generic sparse Cholesky agrees
  const auto sp = reference::cholesky_and_invert(lam.to_sparse_lower());
  CHECK((Matrix(sp.L) - L).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((Matrix(sp.Linv) - Li).cwiseAbs().maxCoeff() < 1e-10);

  const auto post = apply_inverse_transpose(s.B, chol.Linv);
  CHECK((post.to_dense() - D * Li.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  const auto ref = reference::apply_inverse_transpose(s.B, sp.Linv);
  CHECK((post.to_dense() - ref.to_dense()).cwiseAbs().maxCoeff() < 1e-10);

  // posterior covariance equals the dense Kalman update
  const Matrix S = D * D.transpose();
  const Matrix K = S * Hd.transpose() * (Hd * S * Hd.transpose() + 0.05 * Matrix::Identity(Hd.rows(), Hd.rows())).inverse();
  const Matrix post_oracle = S - K * Hd * S;
  const Matrix P = post.to_dense();
  CHECK((P * P.transpose() - post_oracle).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("column nnz of the panels") {
  Setup s;
  const auto obs = split_observations(*s.tree, s.tree->cols_to_internal(fx::identity(80)), diag(80, 1.0));
  const auto lam = build_lambda(s.B, obs);
  const Matrix lower = lam.to_dense(false);
  for (Index c = 0; c < lower.cols(); ++c) {
    Index count = 0;
    for (Index r = c; r < lower.rows(); ++r) count += lower(r, c) != 0.0;
    CHECK(count <= lam.column_nnz(c));
  }
}

TEST_CASE("observation rows that couple regions are rejected") {
  Setup s;
  const auto& f0 = s.tree->region(s.tree->finest()[0]);
  const auto& f1 = s.tree->region(s.tree->finest()[1]);
  SparseMatrix H(1, 80);
  H.insert(0, f0.row_begin) = 0.5;
  H.insert(0, f1.row_begin) = 0.5;
  try {
    split_observations(*s.tree, H, diag(1, 1.0));
    FAIL("expected AssumptionViolation");
  } catch (const AssumptionViolation& e) {
    CHECK(std::string(e.what()).find("row") != std::string::npos);
  }

  SparseMatrix H2(2, 80);
  H2.insert(0, f0.row_begin) = 1.0;
  H2.insert(1, f1.row_begin) = 1.0;
  Matrix Rd = Matrix::Identity(2, 2);
  Rd(0, 1) = Rd(1, 0) = 0.3;
  CHECK_THROWS_AS(split_observations(*s.tree, H2, Rd.sparseView()), AssumptionViolation);

  // a zero row belongs to no region and only enters the likelihood
  SparseMatrix H3(2, 80);
  H3.insert(0, f0.row_begin) = 1.0;
  const auto obs = split_observations(*s.tree, H3, diag(2, 1.0));
  CHECK(obs.n_obs == 2);
}

TEST_CASE("generic inverse-transpose flags values outside the pattern") {
  Setup s;
  const Index nc = s.B.to_dense().cols();
  SparseMatrix Linv(nc, nc);
  Linv.setIdentity();
  // couple the first finest column to a column of a different finest region
  const auto& fa = s.tree->region(s.tree->finest()[0]);
  const auto& fb = s.tree->region(s.tree->finest()[1]);
  Linv.coeffRef(fb.col_begin, fa.col_begin) = 0.5;
  CHECK_THROWS_AS(reference::apply_inverse_transpose(s.B, Linv), PatternBreach);
}
