#include "mrf/reference.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>

namespace mrf::reference {

namespace {

Matrix select(const Matrix& s, const std::vector<Index>& rows, const std::vector<Index>& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (size_t b = 0; b < cols.size(); ++b)
    for (size_t a = 0; a < rows.size(); ++a)
      out(static_cast<Index>(a), static_cast<Index>(b)) = s(rows[a], cols[b]);
  return out;
}

}  // namespace

MultiResFactor mrd(const Matrix& sigma, const TreePtr& tree, MrdWorkspace* workspace) {
  const PartitionTree& t = *tree;
  require_dim(sigma.rows() == t.size() && sigma.cols() == t.size(), "reference::mrd: size mismatch");
  const auto& perm = t.perm();
  Matrix s(t.size(), t.size());
  for (Index j = 0; j < t.size(); ++j)
    for (Index i = 0; i < t.size(); ++i) s(i, j) = sigma(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);

  MrdWorkspace local;
  MrdWorkspace& ws = workspace ? *workspace : local;
  const size_t nreg = t.regions().size();
  ws.W.assign(nreg, {});
  ws.V.assign(nreg, {});
  std::vector<Eigen::LLT<Matrix>> vchol(nreg);

  MultiResFactor B(tree);
  for (int m = 0; m <= t.levels(); ++m) {
    for (int id : t.level_regions(m)) {
      const Region& a = t.region(id);
      std::vector<Index> rows;
      for (Index i = a.row_begin; i < a.row_end; ++i) rows.push_back(i);
      auto& W = ws.W[static_cast<size_t>(id)];
      auto& V = ws.V[static_cast<size_t>(id)];
      W.resize(static_cast<size_t>(m) + 1);
      V.resize(static_cast<size_t>(m) + 1);
      for (int l = 0; l <= m; ++l) {
        const int anc_l = a.chain[static_cast<size_t>(m - l)];
        const auto& kl = t.region(anc_l).knot_rows;
        W[static_cast<size_t>(l)] = select(s, rows, kl);
        V[static_cast<size_t>(l)] = select(s, a.knot_rows, kl);
        for (int k = 0; k < l; ++k) {
          const int anc_k = a.chain[static_cast<size_t>(m - k)];
          const Matrix& Vk_anc_l = ws.V[static_cast<size_t>(anc_l)][static_cast<size_t>(k)];
          const auto& llt = vchol[static_cast<size_t>(anc_k)];
          const Matrix rhs = llt.solve(Vk_anc_l.transpose());
          W[static_cast<size_t>(l)] -= W[static_cast<size_t>(k)] * rhs;
          V[static_cast<size_t>(l)] -= V[static_cast<size_t>(k)] * rhs;
        }
      }
      const Matrix& Vm = V[static_cast<size_t>(m)];
      Matrix sym = 0.5 * (Vm + Vm.transpose());
      vchol[static_cast<size_t>(id)].compute(sym);
      if (vchol[static_cast<size_t>(id)].info() != Eigen::Success)
        throw NotPositiveDefinite("reference::mrd: V not positive definite in region " + t.describe_path(id),
                                  a.col_begin);
      const Matrix L = vchol[static_cast<size_t>(id)].matrixL();
      B.block(id) = L.triangularView<Eigen::Lower>().solve(W[static_cast<size_t>(m)].transpose()).transpose();
    }
  }
  return B;
}

Matrix lambda_dense(const MultiResFactor& B, const SparseMatrix& H_internal, const SparseMatrix& R) {
  const Matrix Bd = B.to_dense();
  const Matrix HB = Matrix(H_internal) * Bd;
  const Matrix Rd(R);
  const Matrix RinvHB = Rd.llt().solve(HB);
  Matrix lam = HB.transpose() * RinvHB;
  lam.diagonal().array() += 1.0;
  return 0.5 * (lam + lam.transpose());
}

SparseCholesky cholesky_and_invert(const SparseMatrix& lambda_lower) {
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<Index>> llt(lambda_lower);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("reference::cholesky_and_invert failed", -1);
  SparseCholesky out;
  out.L = llt.matrixL();
  const Index n = out.L.rows();
  std::vector<Triplet> t;
  const Eigen::SparseMatrix<double, Eigen::RowMajor, Index> Lr(out.L);
  Vector x(n);
  for (Index c = 0; c < n; ++c) {
    // forward substitution for column c; rows above c stay zero
    x.setZero();
    for (Index i = c; i < n; ++i) {
      double rhs = (i == c) ? 1.0 : 0.0;
      double diag = 0.0;
      for (decltype(Lr)::InnerIterator it(Lr, i); it; ++it) {
        if (it.col() < c) continue;
        if (it.col() == i)
          diag = it.value();
        else if (it.col() < i)
          rhs -= it.value() * x[it.col()];
      }
      x[i] = rhs / diag;
      if (x[i] != 0.0) t.emplace_back(i, c, x[i]);
    }
  }
  out.Linv.resize(n, n);
  out.Linv.setFromTriplets(t.begin(), t.end());
  return out;
}

MultiResFactor apply_inverse_transpose(const MultiResFactor& B, const SparseMatrix& Linv, double tol) {
  const SparseMatrix Bs = B.to_sparse();
  const SparseMatrix prod = Bs * SparseMatrix(Linv.transpose());
  const PartitionTree& t = B.tree();
  MultiResFactor out(B.tree_ptr());
  for (Index c = 0; c < prod.outerSize(); ++c) {
    const int g = t.col_region(c);
    const Region& r = t.region(g);
    for (SparseMatrix::InnerIterator it(prod, c); it; ++it) {
      const Index i = it.row();
      if (i >= r.row_begin && i < r.row_end) {
        out.block(g)(i - r.row_begin, c - r.col_begin) = it.value();
      } else if (std::abs(it.value()) > tol) {
        throw PatternBreach("B (L^-1)' has value " + std::to_string(it.value()) + " at (" + std::to_string(i) +
                            "," + std::to_string(c) + ") outside the factor pattern");
      }
    }
  }
  return out;
}

}  // namespace mrf::reference
