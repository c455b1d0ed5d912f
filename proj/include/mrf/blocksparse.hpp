#pragma once

#include "mrf/common.hpp"
#include "mrf/partition.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mrf {

/// Block-sparse multi-resolution factor B = (B^M, ..., B^0).
///
/// One dense block per region: rows are the region's (contiguous) internal
/// rows, columns its knots. Anything outside those blocks is a structural
/// zero, so pattern claims about B hold by construction.
class MultiResFactor {
 public:
  MultiResFactor() = default;
  explicit MultiResFactor(TreePtr tree);

  const PartitionTree& tree() const { return *tree_; }
  const TreePtr& tree_ptr() const { return tree_; }
  Index size() const { return tree_ ? tree_->size() : 0; }

  Matrix& block(int region) { return blocks_[static_cast<size_t>(region)]; }
  const Matrix& block(int region) const { return blocks_[static_cast<size_t>(region)]; }

  /// Rows of finest region f restricted to its support columns
  /// (own knots, then parent's, ..., root's): |I_f| x support(f).
  Matrix row_panel(int finest_region) const;
  void set_row_panel(int finest_region, const Matrix& panel);

  Vector multiply(const Vector& v) const;            ///< B v
  Vector multiply_transpose(const Vector& z) const;  ///< B' z
  Vector implied_variance() const;                   ///< diag(B B') in O(nN)

  MultiResFactor scaled(double c) const;

  Index stored_entries() const;
  Index row_nnz(Index row) const;  ///< stored entries in an internal row

  Matrix to_dense() const;  ///< internal rows x column layout
  SparseMatrix to_sparse(double drop = -1.0) const;

  /// Dense B B' in original (user) ordering.
  Matrix covariance_original() const;

 private:
  TreePtr tree_;
  std::vector<Matrix> blocks_;
};

/// Compressed-row matrix used for A·B, whose pattern is not the MRD pattern.
struct RowSparseMatrix {
  Index rows = 0, cols = 0;
  std::vector<Index> row_ptr{0};
  std::vector<Index> col;
  std::vector<double> val;

  double row_dot(Index i, Index j) const;
  Matrix to_dense() const;
  Index max_row_nnz() const;
};

/// Lower-triangular matrix over the column layout, stored as one dense panel
/// per region: rows (own knots, parent's, ..., root's) x own knots. Holds
/// Λ (lower half plus symmetric diagonal blocks), L and L^{-1}.
class PanelMatrix {
 public:
  PanelMatrix() = default;
  explicit PanelMatrix(TreePtr tree);

  const PartitionTree& tree() const { return *tree_; }
  const TreePtr& tree_ptr() const { return tree_; }
  Matrix& panel(int region) { return panels_[static_cast<size_t>(region)]; }
  const Matrix& panel(int region) const { return panels_[static_cast<size_t>(region)]; }

  /// Dense lower triangle (or full symmetric when symmetric == true).
  Matrix to_dense(bool symmetric = false) const;
  SparseMatrix to_sparse_lower() const;
  Index stored_entries() const;
  /// Entries of column c at or below the diagonal.
  Index column_nnz(Index c) const;
  /// Square lower-triangular restriction to the support columns of a region.
  Matrix support_block(int region) const;

 private:
  TreePtr tree_;
  std::vector<Matrix> panels_;
};

using InnerProductMatrix = PanelMatrix;

/// H and R^{-1} split into finest-region blocks (internal ordering).
struct ObservationBlocks {
  struct Block {
    int region = -1;         ///< -1 for rows of H that are identically zero
    Index row_begin = 0;     ///< first internal row of the region
    std::vector<Index> obs;  ///< observation rows (positions in y)
    Matrix H;                ///< |obs| x |I_region|
    Matrix Rinv;             ///< |obs| x |obs|
  };
  Index n_obs = 0;
  Index n_state = 0;
  std::vector<Block> blocks;
  double log_det_R = 0.0;

  bool empty() const { return n_obs == 0; }
  /// H' R^{-1} r as an internal-order state vector.
  Vector weighted_back_projection(const Vector& residual) const;
  /// r' R^{-1} r
  double weighted_norm2(const Vector& residual) const;
  /// H x for an internal-order state vector.
  Vector apply_H(const Vector& x) const;
};

/// Splits an observation operator (columns already in internal order) and its
/// noise covariance into finest-region blocks. Throws AssumptionViolation when
/// a row of H or an entry of R couples two finest regions.
ObservationBlocks split_observations(const PartitionTree& tree, const SparseMatrix& H_internal,
                                     const SparseMatrix& R);

struct CholeskyFactors {
  PanelMatrix L;
  PanelMatrix Linv;
  bool jittered = false;
  double log_det() const;  ///< log|L| = Σ log diag(L)
};

/// Optional sink for jitter events and locality warnings.
using DiagnosticSink = std::function<void(const std::string&)>;
void set_diagnostic_sink(DiagnosticSink sink);
void emit_diagnostic(const std::string& msg);

/// B^F = A B for an internal-order sparse A. Warns when a row of A has more
/// than max_row_nnz entries (complexity bound void, result still correct).
RowSparseMatrix evolve_factor(const SparseMatrix& A_internal, const MultiResFactor& B,
                              Index max_row_nnz = -1);

/// Λ = I + B' H' R^{-1} H B, only the block pattern of B'B is stored.
InnerProductMatrix build_lambda(const MultiResFactor& B, const ObservationBlocks& obs);

/// L L' = Λ and L^{-1}, both inside the lower pattern of Λ.
CholeskyFactors cholesky_and_invert(const InnerProductMatrix& lambda);

/// B (L^{-1})' in the pattern of B.
MultiResFactor apply_inverse_transpose(const MultiResFactor& B, const PanelMatrix& Linv);

}  // namespace mrf
