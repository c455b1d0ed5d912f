#include "mrf/mrd.hpp"

#include "linalg.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>

namespace mrf {

void CovarianceOracle::fill(const std::vector<Index>& rows, const std::vector<Index>& cols, Matrix& out) const {
  out.resize(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (size_t b = 0; b < cols.size(); ++b)
    for (size_t a = 0; a < rows.size(); ++a)
      out(static_cast<Index>(a), static_cast<Index>(b)) = entry(rows[a], cols[b]);
}

Matrix CovarianceOracle::dense() const {
  const Index n = size();
  Matrix d(n, n);
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) d(i, j) = entry(i, j);
  return d;
}

DenseCovariance::DenseCovariance(Matrix sigma) : sigma_(std::move(sigma)) {
  require_dim(sigma_.rows() == sigma_.cols(), "DenseCovariance: matrix must be square");
}

KernelCovariance::KernelCovariance(Matrix grid, MaternKernel kernel)
    : grid_(std::move(grid)), kernel_(kernel) {
  kernel_.validate();
  if (kernel_.metric == Metric::Circular && grid_.cols() != 1)
    throw DimensionError("circular metric needs a one-dimensional grid");
}

double KernelCovariance::entry(Index i, Index j) const {
  return kernel_(distance(grid_, i, j, kernel_.metric));
}

ForecastCovariance::ForecastCovariance(RowSparseMatrix bf, TreePtr tree, OraclePtr q)
    : bf_(std::move(bf)), tree_(std::move(tree)), q_(std::move(q)) {
  require_dim(bf_.rows == tree_->size(), "ForecastCovariance: factor does not match tree");
  if (q_) require_dim(q_->size() == bf_.rows, "ForecastCovariance: Q has the wrong size");
}

double ForecastCovariance::entry(Index i, Index j) const {
  const auto& rank = tree_->rank();
  double v = bf_.row_dot(rank[static_cast<size_t>(i)], rank[static_cast<size_t>(j)]);
  if (q_) v += q_->entry(i, j);
  return v;
}

void ForecastCovariance::fill(const std::vector<Index>& rows, const std::vector<Index>& cols, Matrix& out) const {
  const auto& rank = tree_->rank();
  out.resize(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  thread_local Vector dense_row;
  if (dense_row.size() != bf_.cols) dense_row = Vector::Zero(bf_.cols);
  for (size_t b = 0; b < cols.size(); ++b) {
    const Index rj = rank[static_cast<size_t>(cols[b])];
    const Index jb = bf_.row_ptr[static_cast<size_t>(rj)], je = bf_.row_ptr[static_cast<size_t>(rj) + 1];
    for (Index k = jb; k < je; ++k) dense_row[bf_.col[static_cast<size_t>(k)]] = bf_.val[static_cast<size_t>(k)];
    for (size_t a = 0; a < rows.size(); ++a) {
      const Index ri = rank[static_cast<size_t>(rows[a])];
      double s = 0.0;
      for (Index k = bf_.row_ptr[static_cast<size_t>(ri)]; k < bf_.row_ptr[static_cast<size_t>(ri) + 1]; ++k)
        s += bf_.val[static_cast<size_t>(k)] * dense_row[bf_.col[static_cast<size_t>(k)]];
      if (q_) s += q_->entry(rows[a], cols[b]);
      out(static_cast<Index>(a), static_cast<Index>(b)) = s;
    }
    for (Index k = jb; k < je; ++k) dense_row[bf_.col[static_cast<size_t>(k)]] = 0.0;
  }
}

double CountingCovariance::entry(Index i, Index j) const {
  const auto lo = static_cast<std::uint64_t>(std::min(i, j)), hi = static_cast<std::uint64_t>(std::max(i, j));
  {
    std::lock_guard<std::mutex> lock(mutex_);
    seen_.insert((lo << 32) | hi);
  }
  return base_.entry(i, j);
}

Index CountingCovariance::distinct_entries() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return static_cast<Index>(seen_.size());
}

MultiResFactor mrd(const CovarianceOracle& sigma, const TreePtr& tree) {
  require_dim(sigma.size() == tree->size(), "mrd: covariance size does not match the tree");
  MultiResFactor B(tree);
  const auto& perm = tree->perm();
  for (int m = 0; m <= tree->levels(); ++m) {
    const auto& ids = tree->level_regions(m);
    detail::ParallelErrors errors;
#pragma omp parallel for schedule(dynamic)
    for (long idx = 0; idx < static_cast<long>(ids.size()); ++idx) errors.guard([&] {
      const int id = ids[static_cast<size_t>(idx)];
      const Region& a = tree->region(id);
      const Index k = a.num_knots();
      std::vector<Index> rows(perm.begin() + a.row_begin, perm.begin() + a.row_end);
      std::vector<Index> cols(static_cast<size_t>(k)), kpos(static_cast<size_t>(k));
      for (Index c = 0; c < k; ++c) {
        kpos[static_cast<size_t>(c)] = a.knot_rows[static_cast<size_t>(c)] - a.row_begin;
        cols[static_cast<size_t>(c)] = perm[static_cast<size_t>(a.knot_rows[static_cast<size_t>(c)])];
      }
      Matrix W;
      sigma.fill(rows, cols, W);
      // subtract what coarser resolutions already explain
      for (size_t q = 1; q < a.chain.size(); ++q) {
        const Matrix& Bg = B.block(a.chain[q]);
        const auto Ia = Bg.middleRows(a.row_begin - tree->region(a.chain[q]).row_begin, a.rows());
        Matrix Ka(k, Bg.cols());
        for (Index c = 0; c < k; ++c) Ka.row(c) = Ia.row(kpos[static_cast<size_t>(c)]);
        W.noalias() -= Ia * Ka.transpose();
      }
      Matrix V(k, k);
      for (Index c = 0; c < k; ++c) V.row(c) = W.row(kpos[static_cast<size_t>(c)]);
      const double threshold = 1e-12 * V.diagonal().cwiseAbs().maxCoeff();
      Matrix L = V;
      Index bad = detail::cholesky_lower_inplace(L, threshold);
      if (bad >= 0) {
        emit_diagnostic("MRD: knot covariance of region " + tree->describe_path(id) + " lost definiteness at pivot " +
                        std::to_string(bad) + "; retrying with 1e-10 jitter");
        L = V;
        L.diagonal().array() += 1e-10;
        bad = detail::cholesky_lower_inplace(L, threshold);
        if (bad >= 0)
          throw NotPositiveDefinite("MRD: knot covariance of region " + tree->describe_path(id) +
                                        " is not positive definite",
                                    a.col_begin + bad);
      }
      B.block(id) = L.triangularView<Eigen::Lower>().solve(W.transpose()).transpose();
    });
    errors.rethrow();
  }
  return B;
}

MrdErrorReport mrd_error_report(const CovarianceOracle& sigma, const TreePtr& tree, Index dense_limit) {
  if (sigma.size() > dense_limit)
    throw DimensionError("mrd_error_report: n = " + std::to_string(sigma.size()) + " exceeds dense limit " +
                         std::to_string(dense_limit));
  const MultiResFactor B = mrd(sigma, tree);
  const Matrix exact = sigma.dense();
  const Matrix diff = B.covariance_original() - exact;
  MrdErrorReport r;
  r.max_abs = diff.cwiseAbs().maxCoeff();
  r.frobenius_relative = diff.norm() / exact.norm();
  return r;
}

}  // namespace mrf
