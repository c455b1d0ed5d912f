#include "mrf/blocksparse.hpp"

#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <sstream>

namespace mrf {

namespace {

std::mutex g_sink_mutex;
DiagnosticSink g_sink;

}  // namespace

void set_diagnostic_sink(DiagnosticSink sink) {
  std::lock_guard<std::mutex> lock(g_sink_mutex);
  g_sink = std::move(sink);
}

void emit_diagnostic(const std::string& msg) {
  std::lock_guard<std::mutex> lock(g_sink_mutex);
  if (g_sink)
    g_sink(msg);
  else
    std::cerr << "[mrf] " << msg << '\n';
}

// ---------------------------------------------------------------- MultiResFactor

MultiResFactor::MultiResFactor(TreePtr tree) : tree_(std::move(tree)) {
  blocks_.reserve(tree_->regions().size());
  for (const auto& r : tree_->regions()) blocks_.push_back(Matrix::Zero(r.rows(), r.num_knots()));
}

Matrix MultiResFactor::row_panel(int f) const {
  const Region& fr = tree_->region(f);
  Matrix panel(fr.rows(), fr.support);
  for (size_t q = 0; q < fr.chain.size(); ++q) {
    const Region& a = tree_->region(fr.chain[q]);
    panel.middleCols(fr.chain_offset[q], a.num_knots()) =
        blocks_[static_cast<size_t>(fr.chain[q])].middleRows(fr.row_begin - a.row_begin, fr.rows());
  }
  return panel;
}

void MultiResFactor::set_row_panel(int f, const Matrix& panel) {
  const Region& fr = tree_->region(f);
  require_dim(panel.rows() == fr.rows() && panel.cols() == fr.support, "set_row_panel: shape mismatch");
  for (size_t q = 0; q < fr.chain.size(); ++q) {
    const Region& a = tree_->region(fr.chain[q]);
    blocks_[static_cast<size_t>(fr.chain[q])].middleRows(fr.row_begin - a.row_begin, fr.rows()) =
        panel.middleCols(fr.chain_offset[q], a.num_knots());
  }
}

Vector MultiResFactor::multiply(const Vector& v) const {
  require_dim(v.size() == size(), "MultiResFactor::multiply: length mismatch");
  Vector out = Vector::Zero(size());
  for (int m = 0; m <= tree_->levels(); ++m) {
    const auto& ids = tree_->level_regions(m);
#pragma omp parallel for schedule(dynamic)
    for (long k = 0; k < static_cast<long>(ids.size()); ++k) {
      const Region& r = tree_->region(ids[static_cast<size_t>(k)]);
      out.segment(r.row_begin, r.rows()) +=
          blocks_[static_cast<size_t>(ids[static_cast<size_t>(k)])] * v.segment(r.col_begin, r.num_knots());
    }
  }
  return out;
}

Vector MultiResFactor::multiply_transpose(const Vector& z) const {
  require_dim(z.size() == size(), "MultiResFactor::multiply_transpose: length mismatch");
  Vector out(size());
  const auto& regs = tree_->regions();
#pragma omp parallel for schedule(dynamic)
  for (long id = 0; id < static_cast<long>(regs.size()); ++id) {
    const Region& r = regs[static_cast<size_t>(id)];
    out.segment(r.col_begin, r.num_knots()) =
        blocks_[static_cast<size_t>(id)].transpose() * z.segment(r.row_begin, r.rows());
  }
  return out;
}

Vector MultiResFactor::implied_variance() const {
  Vector out = Vector::Zero(size());
  for (int m = 0; m <= tree_->levels(); ++m) {
    const auto& ids = tree_->level_regions(m);
#pragma omp parallel for schedule(dynamic)
    for (long k = 0; k < static_cast<long>(ids.size()); ++k) {
      const Region& r = tree_->region(ids[static_cast<size_t>(k)]);
      out.segment(r.row_begin, r.rows()) +=
          blocks_[static_cast<size_t>(ids[static_cast<size_t>(k)])].rowwise().squaredNorm();
    }
  }
  return out;
}

MultiResFactor MultiResFactor::scaled(double c) const {
  MultiResFactor out = *this;
  for (auto& b : out.blocks_) b *= c;
  return out;
}

Index MultiResFactor::stored_entries() const {
  Index total = 0;
  for (const auto& b : blocks_) total += b.size();
  return total;
}

Index MultiResFactor::row_nnz(Index row) const {
  return tree_->region(tree_->row_region(row)).support;
}

Matrix MultiResFactor::to_dense() const {
  Matrix d = Matrix::Zero(size(), size());
  for (size_t id = 0; id < blocks_.size(); ++id) {
    const Region& r = tree_->region(static_cast<int>(id));
    d.block(r.row_begin, r.col_begin, r.rows(), r.num_knots()) = blocks_[id];
  }
  return d;
}

SparseMatrix MultiResFactor::to_sparse(double drop) const {
  std::vector<Triplet> t;
  t.reserve(static_cast<size_t>(stored_entries()));
  for (size_t id = 0; id < blocks_.size(); ++id) {
    const Region& r = tree_->region(static_cast<int>(id));
    const Matrix& b = blocks_[id];
    for (Index j = 0; j < b.cols(); ++j)
      for (Index i = 0; i < b.rows(); ++i)
        if (std::abs(b(i, j)) > drop) t.emplace_back(r.row_begin + i, r.col_begin + j, b(i, j));
  }
  SparseMatrix s(size(), size());
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

Matrix MultiResFactor::covariance_original() const {
  const Matrix d = to_dense();
  const Matrix c = d * d.transpose();
  const auto& perm = tree_->perm();
  Matrix out(size(), size());
  for (Index j = 0; j < size(); ++j)
    for (Index i = 0; i < size(); ++i) out(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]) = c(i, j);
  return out;
}

// --------------------------------------------------------------- RowSparseMatrix

double RowSparseMatrix::row_dot(Index i, Index j) const {
  Index a = row_ptr[static_cast<size_t>(i)], ae = row_ptr[static_cast<size_t>(i) + 1];
  Index b = row_ptr[static_cast<size_t>(j)], be = row_ptr[static_cast<size_t>(j) + 1];
  double s = 0.0;
  while (a < ae && b < be) {
    const Index ca = col[static_cast<size_t>(a)], cb = col[static_cast<size_t>(b)];
    if (ca == cb) {
      s += val[static_cast<size_t>(a++)] * val[static_cast<size_t>(b++)];
    } else if (ca < cb) {
      ++a;
    } else {
      ++b;
    }
  }
  return s;
}

Matrix RowSparseMatrix::to_dense() const {
  Matrix d = Matrix::Zero(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index k = row_ptr[static_cast<size_t>(i)]; k < row_ptr[static_cast<size_t>(i) + 1]; ++k)
      d(i, col[static_cast<size_t>(k)]) = val[static_cast<size_t>(k)];
  return d;
}

Index RowSparseMatrix::max_row_nnz() const {
  Index best = 0;
  for (Index i = 0; i < rows; ++i)
    best = std::max(best, row_ptr[static_cast<size_t>(i) + 1] - row_ptr[static_cast<size_t>(i)]);
  return best;
}

// ------------------------------------------------------------------- PanelMatrix

PanelMatrix::PanelMatrix(TreePtr tree) : tree_(std::move(tree)) {
  panels_.reserve(tree_->regions().size());
  for (const auto& r : tree_->regions()) panels_.push_back(Matrix::Zero(r.support, r.num_knots()));
}

Matrix PanelMatrix::to_dense(bool symmetric) const {
  const Index n = tree_->size();
  Matrix d = Matrix::Zero(n, n);
  for (size_t id = 0; id < panels_.size(); ++id) {
    const Region& g = tree_->region(static_cast<int>(id));
    const Matrix& p = panels_[id];
    for (size_t q = 0; q < g.chain.size(); ++q) {
      const Region& a = tree_->region(g.chain[q]);
      for (Index j = 0; j < g.num_knots(); ++j)
        for (Index i = 0; i < a.num_knots(); ++i) {
          if (q == 0 && i < j) continue;
          const double v = p(g.chain_offset[q] + i, j);
          d(a.col_begin + i, g.col_begin + j) = v;
          if (symmetric) d(g.col_begin + j, a.col_begin + i) = v;
        }
    }
  }
  return d;
}

SparseMatrix PanelMatrix::to_sparse_lower() const {
  std::vector<Triplet> t;
  for (size_t id = 0; id < panels_.size(); ++id) {
    const Region& g = tree_->region(static_cast<int>(id));
    const Matrix& p = panels_[id];
    for (size_t q = 0; q < g.chain.size(); ++q) {
      const Region& a = tree_->region(g.chain[q]);
      for (Index j = 0; j < g.num_knots(); ++j)
        for (Index i = (q == 0 ? j : 0); i < a.num_knots(); ++i)
          t.emplace_back(a.col_begin + i, g.col_begin + j, p(g.chain_offset[q] + i, j));
    }
  }
  SparseMatrix s(tree_->size(), tree_->size());
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

Index PanelMatrix::stored_entries() const {
  Index total = 0;
  for (const auto& r : tree_->regions()) {
    const Index k = r.num_knots();
    total += k * (k + 1) / 2 + (r.support - k) * k;
  }
  return total;
}

Index PanelMatrix::column_nnz(Index c) const {
  const Region& g = tree_->region(tree_->col_region(c));
  return g.support - (c - g.col_begin);
}

Matrix PanelMatrix::support_block(int region) const {
  const Region& g = tree_->region(region);
  Matrix t = Matrix::Zero(g.support, g.support);
  for (size_t q = 0; q < g.chain.size(); ++q) {
    const Index off = g.chain_offset[q];
    const Matrix& p = panels_[static_cast<size_t>(g.chain[q])];
    t.block(off, off, p.rows(), p.cols()) = p;
    t.block(off, off, p.cols(), p.cols()).triangularView<Eigen::StrictlyUpper>().setZero();
  }
  return t;
}

// ------------------------------------------------------------ ObservationBlocks

Vector ObservationBlocks::weighted_back_projection(const Vector& residual) const {
  require_dim(residual.size() == n_obs, "weighted_back_projection: residual length mismatch");
  Vector out = Vector::Zero(n_state);
  for (const auto& b : blocks) {
    if (b.region < 0) continue;
    Vector r(static_cast<Index>(b.obs.size()));
    for (size_t k = 0; k < b.obs.size(); ++k) r[static_cast<Index>(k)] = residual[b.obs[k]];
    out.segment(b.row_begin, b.H.cols()) += b.H.transpose() * (b.Rinv * r);
  }
  return out;
}

double ObservationBlocks::weighted_norm2(const Vector& residual) const {
  require_dim(residual.size() == n_obs, "weighted_norm2: residual length mismatch");
  double s = 0.0;
  for (const auto& b : blocks) {
    Vector r(static_cast<Index>(b.obs.size()));
    for (size_t k = 0; k < b.obs.size(); ++k) r[static_cast<Index>(k)] = residual[b.obs[k]];
    s += r.dot(b.Rinv * r);
  }
  return s;
}

Vector ObservationBlocks::apply_H(const Vector& x) const {
  require_dim(x.size() == n_state, "apply_H: state length mismatch");
  Vector y = Vector::Zero(n_obs);
  for (const auto& b : blocks) {
    if (b.region < 0) continue;
    const Vector part = b.H * x.segment(b.row_begin, b.H.cols());
    for (size_t k = 0; k < b.obs.size(); ++k) y[b.obs[k]] = part[static_cast<Index>(k)];
  }
  return y;
}

ObservationBlocks split_observations(const PartitionTree& tree, const SparseMatrix& H_internal,
                                     const SparseMatrix& R) {
  const Index nt = H_internal.rows();
  require_dim(H_internal.cols() == tree.size(), "split_observations: H must have n_G columns");
  require_dim(R.rows() == nt && R.cols() == nt, "split_observations: R must be n_t x n_t");

  std::vector<int> obs_region(static_cast<size_t>(nt), -1);
  const RowSparse Hr(H_internal);
  for (Index i = 0; i < nt; ++i) {
    for (RowSparse::InnerIterator it(Hr, i); it; ++it) {
      if (it.value() == 0.0) continue;
      const int f = tree.row_region(it.col());
      int& cur = obs_region[static_cast<size_t>(i)];
      if (cur == -1) {
        cur = f;
      } else if (cur != f) {
        throw AssumptionViolation("observation row " + std::to_string(i) + " couples finest regions " +
                                  tree.describe_path(cur) + " and " + tree.describe_path(f));
      }
    }
  }
  for (Index c = 0; c < R.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(R, c); it; ++it)
      if (it.value() != 0.0 && obs_region[static_cast<size_t>(it.row())] != obs_region[static_cast<size_t>(it.col())])
        throw AssumptionViolation("noise covariance entry (" + std::to_string(it.row()) + "," +
                                  std::to_string(it.col()) + ") couples observations of different finest regions");

  ObservationBlocks out;
  out.n_obs = nt;
  out.n_state = tree.size();
  std::vector<int> ids;
  for (int f : obs_region) ids.push_back(f);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const Matrix Rd(R);
  const Matrix Hd_rows = Matrix(H_internal);
  for (int f : ids) {
    ObservationBlocks::Block b;
    b.region = f;
    for (Index i = 0; i < nt; ++i)
      if (obs_region[static_cast<size_t>(i)] == f) b.obs.push_back(i);
    const auto m = static_cast<Index>(b.obs.size());
    Matrix Rb(m, m);
    for (Index a = 0; a < m; ++a)
      for (Index c = 0; c < m; ++c) Rb(a, c) = Rd(b.obs[static_cast<size_t>(a)], b.obs[static_cast<size_t>(c)]);
    Eigen::LLT<Matrix> llt(Rb);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("observation noise covariance is not positive definite", b.obs.front());
    b.Rinv = llt.solve(Matrix::Identity(m, m));
    out.log_det_R += 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    if (f >= 0) {
      const Region& r = tree.region(f);
      b.row_begin = r.row_begin;
      b.H.resize(m, r.rows());
      for (Index a = 0; a < m; ++a) b.H.row(a) = Hd_rows.row(b.obs[static_cast<size_t>(a)]).segment(r.row_begin, r.rows());
    }
    out.blocks.push_back(std::move(b));
  }
  return out;
}

double CholeskyFactors::log_det() const {
  double s = 0.0;
  for (const auto& r : L.tree().regions())
    s += L.panel(static_cast<int>(&r - L.tree().regions().data())).topRows(r.num_knots()).diagonal().array().log().sum();
  return s;
}

// ------------------------------------------------------------------- kernels

RowSparseMatrix evolve_factor(const SparseMatrix& A_internal, const MultiResFactor& B, Index max_row_nnz) {
  const PartitionTree& tree = B.tree();
  const Index n = tree.size();
  require_dim(A_internal.rows() == n && A_internal.cols() == n, "evolve_factor: A must be n_G x n_G");
  const RowSparse A(A_internal);

  if (max_row_nnz >= 0) {
    for (Index i = 0; i < n; ++i) {
      const Index nnz = A.outerIndexPtr()[i + 1] - A.outerIndexPtr()[i];
      if (nnz > max_row_nnz) {
        emit_diagnostic("evolution row " + std::to_string(i) + " has " + std::to_string(nnz) +
                        " nonzeros (budget " + std::to_string(max_row_nnz) + "); complexity bound void");
        break;
      }
    }
  }

  std::vector<std::vector<std::pair<Index, double>>> rows(static_cast<size_t>(n));
#pragma omp parallel
  {
    Vector acc = Vector::Zero(n);
    std::vector<char> seen(static_cast<size_t>(n), 0);
    std::vector<Index> touched;
#pragma omp for schedule(dynamic, 16)
    for (Index i = 0; i < n; ++i) {
      touched.clear();
      for (RowSparse::InnerIterator it(A, i); it; ++it) {
        const Index j = it.col();
        const Region& f = tree.region(tree.row_region(j));
        for (size_t q = 0; q < f.chain.size(); ++q) {
          const Region& a = tree.region(f.chain[q]);
          const auto brow = B.block(f.chain[q]).row(j - a.row_begin);
          for (Index c = 0; c < a.num_knots(); ++c) {
            const Index col = a.col_begin + c;
            if (!seen[static_cast<size_t>(col)]) {
              seen[static_cast<size_t>(col)] = 1;
              touched.push_back(col);
            }
            acc[col] += it.value() * brow[c];
          }
        }
      }
      std::sort(touched.begin(), touched.end());
      auto& out = rows[static_cast<size_t>(i)];
      out.reserve(touched.size());
      for (Index col : touched) {
        out.emplace_back(col, acc[col]);
        acc[col] = 0.0;
        seen[static_cast<size_t>(col)] = 0;
      }
    }
  }

  RowSparseMatrix bf;
  bf.rows = n;
  bf.cols = n;
  bf.row_ptr.assign(static_cast<size_t>(n) + 1, 0);
  for (Index i = 0; i < n; ++i)
    bf.row_ptr[static_cast<size_t>(i) + 1] = bf.row_ptr[static_cast<size_t>(i)] + static_cast<Index>(rows[static_cast<size_t>(i)].size());
  bf.col.reserve(static_cast<size_t>(bf.row_ptr.back()));
  bf.val.reserve(static_cast<size_t>(bf.row_ptr.back()));
  for (const auto& r : rows)
    for (const auto& [c, v] : r) {
      bf.col.push_back(c);
      bf.val.push_back(v);
    }
  return bf;
}

InnerProductMatrix build_lambda(const MultiResFactor& B, const ObservationBlocks& obs) {
  const PartitionTree& tree = B.tree();
  require_dim(obs.n_state == tree.size(), "build_lambda: observation blocks built for another grid");
  const auto& regs = tree.regions();
  std::vector<Matrix> gram(regs.size());
  for (const int f : tree.finest()) gram[static_cast<size_t>(f)] = Matrix::Zero(tree.region(f).support, tree.region(f).support);

#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < static_cast<long>(obs.blocks.size()); ++k) {
    const auto& b = obs.blocks[static_cast<size_t>(k)];
    if (b.region < 0) continue;
    const Matrix P = b.H * B.row_panel(b.region);
    gram[static_cast<size_t>(b.region)].noalias() = P.transpose() * b.Rinv * P;
  }

  for (int m = tree.levels() - 1; m >= 0; --m) {
    const auto& ids = tree.level_regions(m);
#pragma omp parallel for schedule(dynamic)
    for (long k = 0; k < static_cast<long>(ids.size()); ++k) {
      const int g = ids[static_cast<size_t>(k)];
      const Index s = tree.region(g).support;
      Matrix acc = Matrix::Zero(s, s);
      for (int c : tree.region(g).children) acc += gram[static_cast<size_t>(c)].bottomRightCorner(s, s);
      gram[static_cast<size_t>(g)] = std::move(acc);
    }
  }

  InnerProductMatrix lambda(B.tree_ptr());
#pragma omp parallel for schedule(dynamic)
  for (long id = 0; id < static_cast<long>(regs.size()); ++id) {
    const Index k = regs[static_cast<size_t>(id)].num_knots();
    Matrix& p = lambda.panel(static_cast<int>(id));
    p = gram[static_cast<size_t>(id)].leftCols(k);
    p.topRows(k).diagonal().array() += 1.0;
    // lower half is authoritative; mirror it onto the upper half of the diagonal block
    Matrix top = p.topRows(k).triangularView<Eigen::Lower>();
    top.triangularView<Eigen::StrictlyUpper>() = top.transpose().triangularView<Eigen::StrictlyUpper>();
    p.topRows(k) = top;
  }
  return lambda;
}

namespace {

struct FactorAttempt {
  Index failed_pivot = -1;
  PanelMatrix L;
};

FactorAttempt factor_panels(const InnerProductMatrix& lambda, double shift, double threshold) {
  const PartitionTree& tree = lambda.tree();
  FactorAttempt out{-1, PanelMatrix(lambda.tree_ptr())};
  std::vector<Matrix> update(tree.regions().size());
  for (int m = tree.levels(); m >= 0 && out.failed_pivot < 0; --m) {
    const auto& ids = tree.level_regions(m);
    Index failed = -1;
#pragma omp parallel for schedule(dynamic)
    for (long k = 0; k < static_cast<long>(ids.size()); ++k) {
      const int g = ids[static_cast<size_t>(k)];
      const Region& r = tree.region(g);
      const Index kk = r.num_knots(), s = r.support;
      Matrix front = Matrix::Zero(s, s);
      front.leftCols(kk) = lambda.panel(g);
      front.topLeftCorner(kk, kk).diagonal().array() += shift;
      for (int c : r.children) {
        front += update[static_cast<size_t>(c)];
        update[static_cast<size_t>(c)].resize(0, 0);
      }
      Matrix diag = front.topLeftCorner(kk, kk);
      const Index bad = detail::cholesky_lower_inplace(diag, threshold);
      if (bad >= 0) {
#pragma omp critical(mrf_pivot)
        if (failed < 0 || r.col_begin + bad < failed) failed = r.col_begin + bad;
        continue;
      }
      Matrix& panel = out.L.panel(g);
      panel.topRows(kk) = diag;
      if (s > kk) {
        const Matrix below = diag.triangularView<Eigen::Lower>()
                                 .solve(front.bottomLeftCorner(s - kk, kk).transpose())
                                 .transpose();
        panel.bottomRows(s - kk) = below;
        update[static_cast<size_t>(g)] = front.bottomRightCorner(s - kk, s - kk);
        update[static_cast<size_t>(g)].noalias() -= below * below.transpose();
      }
    }
    out.failed_pivot = failed;
  }
  return out;
}

PanelMatrix invert_panels(const PanelMatrix& L) {
  const PartitionTree& tree = L.tree();
  PanelMatrix inv(L.tree_ptr());
  const auto& regs = tree.regions();
#pragma omp parallel for schedule(dynamic)
  for (long id = 0; id < static_cast<long>(regs.size()); ++id) {
    const Region& g = regs[static_cast<size_t>(id)];
    const Index kk = g.num_knots();
    Matrix x = Matrix::Zero(g.support, kk);
    const Matrix& own = L.panel(static_cast<int>(id));
    x.topRows(kk) = own.topRows(kk).triangularView<Eigen::Lower>().solve(Matrix::Identity(kk, kk));
    for (size_t q = 1; q < g.chain.size(); ++q) {
      const Index off_q = g.chain_offset[q];
      const Index ka = regs[static_cast<size_t>(g.chain[q])].num_knots();
      Matrix rhs = Matrix::Zero(ka, kk);
      for (size_t s = 0; s < q; ++s) {
        const Index off_s = g.chain_offset[s];
        const Matrix& ps = L.panel(g.chain[s]);
        rhs.noalias() -= ps.block(off_q - off_s, 0, ka, ps.cols()) * x.middleRows(off_s, ps.cols());
      }
      x.middleRows(off_q, ka) =
          L.panel(g.chain[q]).topRows(ka).triangularView<Eigen::Lower>().solve(rhs);
    }
    inv.panel(static_cast<int>(id)) = std::move(x);
  }
  return inv;
}

}  // namespace

CholeskyFactors cholesky_and_invert(const InnerProductMatrix& lambda) {
  const PartitionTree& tree = lambda.tree();
  double max_diag = 0.0;
  for (const auto& r : tree.regions())
    max_diag = std::max(max_diag, lambda.panel(static_cast<int>(&r - tree.regions().data()))
                                      .topRows(r.num_knots()).diagonal().maxCoeff());
  const double threshold = 1e-12 * max_diag;

  CholeskyFactors out;
  FactorAttempt attempt = factor_panels(lambda, 0.0, threshold);
  if (attempt.failed_pivot >= 0) {
    emit_diagnostic("Cholesky pivot " + std::to_string(attempt.failed_pivot) +
                    " not positive; retrying with 1e-10 diagonal jitter");
    out.jittered = true;
    const Index first = attempt.failed_pivot;
    attempt = factor_panels(lambda, 1e-10, threshold);
    if (attempt.failed_pivot >= 0)
      throw NotPositiveDefinite("inner-product matrix not positive definite at pivot " +
                                    std::to_string(attempt.failed_pivot) + " (first failure at " +
                                    std::to_string(first) + ")",
                                attempt.failed_pivot);
  }
  out.L = std::move(attempt.L);
  out.Linv = invert_panels(out.L);
  return out;
}

MultiResFactor apply_inverse_transpose(const MultiResFactor& B, const PanelMatrix& Linv) {
  require_dim(&B.tree() == &Linv.tree(), "apply_inverse_transpose: factors from different trees");
  MultiResFactor out(B.tree_ptr());
  const auto& fin = B.tree().finest();
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < static_cast<long>(fin.size()); ++k) {
    const int f = fin[static_cast<size_t>(k)];
    const Matrix t = Linv.support_block(f);
    const Matrix panel = B.row_panel(f) * t.transpose();
    out.set_row_panel(f, panel);
  }
  return out;
}

}  // namespace mrf
