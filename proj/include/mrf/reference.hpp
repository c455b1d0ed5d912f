#pragma once

// Serial, dense or generic-sparse versions of the core kernels. They follow
// the textbook recursions literally and exist to cross-check (and benchmark)
// the block-structured parallel code paths.

#include "mrf/blocksparse.hpp"
#include "mrf/common.hpp"
#include "mrf/partition.hpp"

#include <vector>

namespace mrf::reference {

/// W^ℓ and V^ℓ for every region, indexed [region][ℓ].
struct MrdWorkspace {
  std::vector<std::vector<Matrix>> W;
  std::vector<std::vector<Matrix>> V;
};

/// MRD through the W/V recursion on a dense user-order Σ.
MultiResFactor mrd(const Matrix& sigma, const TreePtr& tree, MrdWorkspace* workspace = nullptr);

/// Dense I + B'H'R^{-1}HB, H with internal-order columns.
Matrix lambda_dense(const MultiResFactor& B, const SparseMatrix& H_internal, const SparseMatrix& R);

struct SparseCholesky {
  SparseMatrix L;
  SparseMatrix Linv;
};

/// Generic sparse Cholesky in the fixed column order, and L^{-1} by one
/// sparse triangular solve per column.
SparseCholesky cholesky_and_invert(const SparseMatrix& lambda_lower);

/// Generic sparse B (L^{-1})'. Throws PatternBreach for any value above tol
/// that lands outside the pattern of B.
MultiResFactor apply_inverse_transpose(const MultiResFactor& B, const SparseMatrix& Linv, double tol = 1e-10);

}  // namespace mrf::reference
