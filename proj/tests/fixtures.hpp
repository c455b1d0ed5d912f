#pragma once

#include "mrf/blocksparse.hpp"
#include "mrf/kernels.hpp"
#include "mrf/mrd.hpp"
#include "mrf/partition.hpp"
#include "mrf/rng.hpp"
#include "mrf/ssm.hpp"

#include <set>
#include <utility>

namespace fx {

using namespace mrf;

inline Matrix line_grid(Index n) {
  Matrix g(n, 1);
  for (Index i = 0; i < n; ++i) g(i, 0) = static_cast<double>(i) / static_cast<double>(n);
  return g;
}

inline Matrix square_grid(Index nx, Index ny) {
  Matrix g(nx * ny, 2);
  for (Index iy = 0; iy < ny; ++iy)
    for (Index ix = 0; ix < nx; ++ix) {
      g(iy * nx + ix, 0) = (static_cast<double>(ix) + 0.5) / static_cast<double>(nx);
      g(iy * nx + ix, 1) = (static_cast<double>(iy) + 0.5) / static_cast<double>(ny);
    }
  return g;
}

/// 80 points, M = 3, J = 3, r = 2.
inline TreePtr fig1_tree() {
  PartitionConfig c;
  c.levels = 3;
  c.children = {3};
  c.knots = {2};
  return build_partition(line_grid(80), c);
}

inline TreePtr boundary_tree(Index n = 80) {
  PartitionConfig c;
  c.levels = 3;
  c.children = {3};
  c.knots = {2};
  c.placement = KnotPlacement::Boundary;
  return build_partition(line_grid(n), c);
}

inline Matrix random_spd(Index n, Rng& rng) {
  const Matrix X = standard_normal(n, n, rng);
  Matrix S = X * X.transpose() / static_cast<double>(n);
  S.diagonal().array() += 0.5;
  return S;
}

inline KernelCovariance matern_line(double nu, double range, Metric metric = Metric::Circular, Index n = 80) {
  return KernelCovariance(line_grid(n), MaternKernel{nu, range, 1.0, metric});
}

inline SparseMatrix identity(Index n) {
  SparseMatrix I(n, n);
  I.setIdentity();
  return I;
}

/// (row, col) pairs with |value| > tol.
inline std::set<std::pair<Index, Index>> pattern(const Matrix& m, double tol = 0.0) {
  std::set<std::pair<Index, Index>> s;
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (std::abs(m(i, j)) > tol) s.insert({i, j});
  return s;
}

inline bool subset(const std::set<std::pair<Index, Index>>& a, const std::set<std::pair<Index, Index>>& b) {
  for (const auto& p : a)
    if (!b.count(p)) return false;
  return true;
}

/// Structural pattern of a block-sparse factor (every stored slot).
inline std::set<std::pair<Index, Index>> structural_pattern(const MultiResFactor& B) {
  std::set<std::pair<Index, Index>> s;
  for (const auto& r : B.tree().regions())
    for (Index j = 0; j < r.num_knots(); ++j)
      for (Index i = r.row_begin; i < r.row_end; ++i) s.insert({i, r.col_begin + j});
  return s;
}

}  // namespace fx
