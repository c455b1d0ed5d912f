#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrf {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, Index>;
using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor, Index>;
using Triplet = Eigen::Triplet<double, Index>;

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Partition configuration cannot be realised on the given grid.
class InfeasibleConfig : public Error {
 public:
  using Error::Error;
};

/// H or R couples two finest regions, or A breaks locality.
class AssumptionViolation : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(const std::string& what, Index pivot)
      : Error(what), pivot_(pivot) {}
  Index pivot() const noexcept { return pivot_; }

 private:
  Index pivot_;
};

/// A value appeared outside a sparsity pattern that theory says is closed.
class PatternBreach : public Error {
 public:
  using Error::Error;
};

inline void require_dim(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace mrf
