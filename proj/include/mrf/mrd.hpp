#pragma once

#include "mrf/blocksparse.hpp"
#include "mrf/common.hpp"
#include "mrf/kernels.hpp"
#include "mrf/partition.hpp"

#include <memory>
#include <mutex>
#include <unordered_set>
#include <vector>

namespace mrf {

/// Symmetric covariance accessed entrywise, in user (grid) ordering.
/// Implementations must tolerate concurrent calls.
class CovarianceOracle {
 public:
  virtual ~CovarianceOracle() = default;
  virtual Index size() const = 0;
  virtual double entry(Index i, Index j) const = 0;
  /// out(a, b) = entry(rows[a], cols[b]); out is resized.
  virtual void fill(const std::vector<Index>& rows, const std::vector<Index>& cols, Matrix& out) const;
  Matrix dense() const;
};

using OraclePtr = std::shared_ptr<const CovarianceOracle>;

class DenseCovariance : public CovarianceOracle {
 public:
  explicit DenseCovariance(Matrix sigma);
  Index size() const override { return sigma_.rows(); }
  double entry(Index i, Index j) const override { return sigma_(i, j); }
  const Matrix& matrix() const { return sigma_; }

 private:
  Matrix sigma_;
};

class KernelCovariance : public CovarianceOracle {
 public:
  KernelCovariance(Matrix grid, MaternKernel kernel);
  Index size() const override { return grid_.rows(); }
  double entry(Index i, Index j) const override;
  const MaternKernel& kernel() const { return kernel_; }
  const Matrix& grid() const { return grid_; }

 private:
  Matrix grid_;
  MaternKernel kernel_;
};

/// c · Σ for a wrapped oracle.
class ScaledCovariance : public CovarianceOracle {
 public:
  ScaledCovariance(OraclePtr base, double scale) : base_(std::move(base)), scale_(scale) {}
  Index size() const override { return base_->size(); }
  double entry(Index i, Index j) const override { return scale_ * base_->entry(i, j); }

 private:
  OraclePtr base_;
  double scale_;
};

/// Σ^F(i, j) = B^F[i,:]·B^F[j,:] + Q(i, j), with B^F = A·B held in internal
/// row order and Q (may be null) in user order.
class ForecastCovariance : public CovarianceOracle {
 public:
  ForecastCovariance(RowSparseMatrix bf, TreePtr tree, OraclePtr q);
  Index size() const override { return bf_.rows; }
  double entry(Index i, Index j) const override;
  void fill(const std::vector<Index>& rows, const std::vector<Index>& cols, Matrix& out) const override;

 private:
  RowSparseMatrix bf_;
  TreePtr tree_;
  OraclePtr q_;
};

/// Records the distinct entries requested from a wrapped oracle.
class CountingCovariance : public CovarianceOracle {
 public:
  explicit CountingCovariance(const CovarianceOracle& base) : base_(base) {}
  Index size() const override { return base_.size(); }
  double entry(Index i, Index j) const override;
  Index distinct_entries() const;

 private:
  const CovarianceOracle& base_;
  mutable std::mutex mutex_;
  mutable std::unordered_set<std::uint64_t> seen_;
};

/// B = mrd(Σ) on the given tree.
MultiResFactor mrd(const CovarianceOracle& sigma, const TreePtr& tree);

struct MrdErrorReport {
  double max_abs = 0.0;
  double frobenius_relative = 0.0;
};

/// Dense comparison of BB' against Σ; refuses n above dense_limit.
MrdErrorReport mrd_error_report(const CovarianceOracle& sigma, const TreePtr& tree, Index dense_limit = 4000);

}  // namespace mrf
