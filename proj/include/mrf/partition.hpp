#pragma once

#include "mrf/common.hpp"

#include <memory>
#include <string>
#include <vector>

namespace mrf {

enum class KnotPlacement {
  /// r_m points nearest an equispaced template over the region box.
  Uniform,
  /// J-1 knots at the boundaries between the children (1D exactness layout).
  Boundary,
};

struct PartitionConfig {
  int levels = 0;                 ///< M; resolutions are 0..M
  std::vector<int> children;      ///< J_1..J_M (a single entry is broadcast)
  std::vector<int> knots;         ///< r_0..r_M (a single entry is broadcast)
  KnotPlacement placement = KnotPlacement::Uniform;
  /// Finest level made of singleton regions (low-rank-plus-diagonal tree).
  /// Requires levels == 1; children is ignored.
  bool singleton_finest = false;

  int children_at(int level) const;  ///< J for splitting a level-(level-1) region
  int knots_at(int level) const;     ///< r_level
  void validate() const;
};

struct Box {
  std::vector<double> lo, hi;
  int longest_axis() const;
};

struct Region {
  std::vector<int> path;   ///< (j_1..j_m), 1-based as in the usual notation
  int level = 0;
  int parent = -1;
  std::vector<int> children;
  std::vector<Index> indices;  ///< original grid indices, sorted
  std::vector<Index> knots;    ///< original grid indices, sorted
  Box box;

  // Layout, filled by PartitionTree::finalize.
  Index row_begin = 0, row_end = 0;  ///< contiguous internal rows
  Index col_begin = 0;               ///< first column of this region's knots
  std::vector<Index> knot_rows;      ///< internal rows of knots, ascending
  std::vector<int> chain;            ///< self, parent, ..., root
  std::vector<Index> chain_offset;   ///< column offset of chain[q] inside the support
  Index support = 0;                 ///< Σ |K| over chain (row nnz for finest)

  Index rows() const { return row_end - row_begin; }
  Index num_knots() const { return static_cast<Index>(knots.size()); }
};

/// Recursive domain partition with knots and the hierarchical state ordering.
///
/// Internal row order keeps every region contiguous; finest regions follow
/// lexicographic path order. Column order is (B^M, B^{M-1}, ..., B^0): knots
/// grouped by resolution, finest first, then by region in lexicographic order.
class PartitionTree {
 public:
  PartitionTree(Index n, int dim, int levels, std::vector<Region> regions);

  Index size() const { return n_; }
  int dim() const { return dim_; }
  int levels() const { return levels_; }
  const std::vector<Region>& regions() const { return regions_; }
  const Region& region(int id) const { return regions_[static_cast<size_t>(id)]; }
  const std::vector<int>& level_regions(int m) const { return by_level_[static_cast<size_t>(m)]; }
  const std::vector<int>& finest() const { return by_level_.back(); }

  /// perm[internal] = original index.
  const std::vector<Index>& perm() const { return perm_; }
  /// rank[original] = internal index.
  const std::vector<Index>& rank() const { return rank_; }
  /// Internal row of the knot owning column c.
  Index col_row(Index c) const { return col_row_[static_cast<size_t>(c)]; }
  /// Region owning internal column c.
  int col_region(Index c) const { return col_region_[static_cast<size_t>(c)]; }
  /// Finest region containing internal row i.
  int row_region(Index i) const { return row_region_[static_cast<size_t>(i)]; }
  /// Maximum support over finest regions (N_max).
  Index max_support() const { return max_support_; }

  /// True when region a is an ancestor of (or equal to) region b.
  bool contains(int a, int b) const;

  Vector to_internal(const Vector& v) const;
  Vector to_original(const Vector& v) const;
  Matrix rows_to_internal(const Matrix& m) const;
  Matrix rows_to_original(const Matrix& m) const;
  /// P A P' for a square user-order sparse matrix.
  SparseMatrix sym_to_internal(const SparseMatrix& a) const;
  /// A P' (columns into internal order), for observation operators.
  SparseMatrix cols_to_internal(const SparseMatrix& a) const;

  std::string describe_path(int region) const;

 private:
  Index n_;
  int dim_;
  int levels_;
  std::vector<Region> regions_;
  std::vector<std::vector<int>> by_level_;
  std::vector<Index> perm_, rank_, col_row_;
  std::vector<int> col_region_, row_region_;
  Index max_support_ = 0;
};

using TreePtr = std::shared_ptr<const PartitionTree>;

/// grid is n x d (one point per row).
TreePtr build_partition(const Matrix& grid, const PartitionConfig& config);

/// Low-rank-plus-diagonal tree: r0 global knots, every other point alone.
TreePtr build_singleton_tree(const Matrix& grid, int root_knots);

}  // namespace mrf
