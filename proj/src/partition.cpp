#include "mrf/partition.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace mrf {

int PartitionConfig::children_at(int level) const {
  if (children.empty()) throw InfeasibleConfig("partition config: no children counts given");
  if (children.size() == 1) return children.front();
  return children.at(static_cast<size_t>(level - 1));
}

int PartitionConfig::knots_at(int level) const {
  if (knots.empty()) throw InfeasibleConfig("partition config: no knot counts given");
  if (knots.size() == 1) return knots.front();
  return knots.at(static_cast<size_t>(level));
}

void PartitionConfig::validate() const {
  if (levels < 0) throw InfeasibleConfig("partition config: levels must be >= 0");
  if (singleton_finest && levels != 1)
    throw InfeasibleConfig("partition config: singleton finest level needs levels == 1");
  if (knots.size() != 1 && knots.size() != static_cast<size_t>(levels) + 1)
    throw InfeasibleConfig("partition config: need 1 or M+1 knot counts");
  for (int m = 0; m <= levels; ++m)
    if (knots_at(m) < 1) throw InfeasibleConfig("partition config: every r_m must be >= 1");
  if (levels > 0 && !singleton_finest) {
    if (children.size() != 1 && children.size() != static_cast<size_t>(levels))
      throw InfeasibleConfig("partition config: need 1 or M children counts");
    for (int m = 1; m <= levels; ++m)
      if (children_at(m) < 2) throw InfeasibleConfig("partition config: every J_m must be >= 2");
  }
  if (placement == KnotPlacement::Boundary) {
    if (singleton_finest) throw InfeasibleConfig("boundary knots need a regular tree");
    for (int m = 0; m < levels; ++m)
      if (knots_at(m) != children_at(m + 1) - 1)
        throw InfeasibleConfig("boundary knot placement requires r_m = J_{m+1} - 1");
  }
}

int Box::longest_axis() const {
  int best = 0;
  double width = -1.0;
  for (size_t a = 0; a < lo.size(); ++a) {
    if (hi[a] - lo[a] > width) {
      width = hi[a] - lo[a];
      best = static_cast<int>(a);
    }
  }
  return best;
}

namespace {

Box bounding_box(const Matrix& grid, const std::vector<Index>& idx) {
  const auto d = static_cast<size_t>(grid.cols());
  Box b{std::vector<double>(d, std::numeric_limits<double>::infinity()),
        std::vector<double>(d, -std::numeric_limits<double>::infinity())};
  for (Index i : idx)
    for (size_t a = 0; a < d; ++a) {
      b.lo[a] = std::min(b.lo[a], grid(i, static_cast<Index>(a)));
      b.hi[a] = std::max(b.hi[a], grid(i, static_cast<Index>(a)));
    }
  return b;
}

std::string path_string(const std::vector<int>& path) {
  if (path.empty()) return "(root)";
  std::ostringstream os;
  os << '(';
  for (size_t k = 0; k < path.size(); ++k) os << (k ? "," : "") << path[k];
  os << ')';
  return os.str();
}

// Points ordered along the longest box axis, then remaining axes, then index.
std::vector<Index> sorted_along(const Matrix& grid, std::vector<Index> idx, int axis) {
  const Index d = grid.cols();
  std::sort(idx.begin(), idx.end(), [&](Index a, Index b) {
    if (grid(a, axis) != grid(b, axis)) return grid(a, axis) < grid(b, axis);
    for (Index k = 0; k < d; ++k) {
      if (k == axis) continue;
      if (grid(a, k) != grid(b, k)) return grid(a, k) < grid(b, k);
    }
    return a < b;
  });
  return idx;
}

// Equispaced template with at least r nodes, cells as square as the box allows.
std::vector<std::vector<double>> knot_template(const Box& box, int r) {
  const size_t d = box.lo.size();
  std::vector<int> g(d, 1);
  auto product = [&] {
    long p = 1;
    for (int v : g) p *= v;
    return p;
  };
  while (product() < r) {
    size_t best = 0;
    double ratio = -1.0;
    for (size_t a = 0; a < d; ++a) {
      const double w = box.hi[a] - box.lo[a];
      if (w / g[a] > ratio) {
        ratio = w / g[a];
        best = a;
      }
    }
    ++g[best];
  }
  std::vector<std::vector<double>> nodes;
  const long total = product();
  for (long flat = 0; flat < total; ++flat) {
    std::vector<double> p(d);
    long rem = flat;
    for (size_t a = d; a-- > 0;) {
      const long k = rem % g[a];
      rem /= g[a];
      p[a] = box.lo[a] + (static_cast<double>(k) + 0.5) / g[a] * (box.hi[a] - box.lo[a]);
    }
    nodes.push_back(std::move(p));
  }
  if (total == r) return nodes;
  std::vector<std::vector<double>> spread;
  for (int k = 0; k < r; ++k)
    spread.push_back(nodes[static_cast<size_t>(std::floor((k + 0.5) * static_cast<double>(total) / r))]);
  return spread;
}

std::vector<Index> pick_uniform_knots(const Matrix& grid, const Box& box,
                                      const std::vector<Index>& remaining, int r) {
  std::vector<Index> chosen;
  std::vector<char> taken(remaining.size(), 0);
  for (const auto& node : knot_template(box, r)) {
    size_t best = remaining.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < remaining.size(); ++k) {
      if (taken[k]) continue;
      double dist = 0.0;
      for (size_t a = 0; a < node.size(); ++a) {
        const double diff = grid(remaining[k], static_cast<Index>(a)) - node[a];
        dist += diff * diff;
      }
      // remaining is sorted by index, so strict < keeps the lowest index on ties
      if (dist < best_d) {
        best_d = dist;
        best = k;
      }
    }
    taken[best] = 1;
    chosen.push_back(remaining[best]);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

class Builder {
 public:
  Builder(const Matrix& grid, const PartitionConfig& cfg)
      : grid_(grid), cfg_(cfg), used_(static_cast<size_t>(grid.rows()), 0) {}

  std::vector<Region> run() {
    std::vector<Index> all(static_cast<size_t>(grid_.rows()));
    std::iota(all.begin(), all.end(), Index{0});
    std::deque<Region> queue;
    Region root;
    root.indices = std::move(all);
    queue.push_back(std::move(root));
    std::vector<Region> out;
    while (!queue.empty()) {
      Region reg = std::move(queue.front());
      queue.pop_front();
      for (auto& child : process(reg)) queue.push_back(std::move(child));
      out.push_back(std::move(reg));
    }
    return out;
  }

 private:
  std::vector<Region> process(Region& reg) {
    reg.box = bounding_box(grid_, reg.indices);
    std::vector<Index> remaining;
    for (Index i : reg.indices)
      if (!used_[static_cast<size_t>(i)]) remaining.push_back(i);

    const int m = reg.level;
    if (m == cfg_.levels) {
      if (remaining.empty())
        throw InfeasibleConfig("partition: region " + path_string(reg.path) +
                               " has no unused points left at the finest resolution");
      reg.knots = remaining;
      mark(reg.knots);
      return {};
    }

    const int r = cfg_.knots_at(m);
    const int axis = reg.box.longest_axis();
    std::vector<Index> sorted_all = sorted_along(grid_, reg.indices, axis);
    std::vector<size_t> starts;  // positions in sorted_all where each child begins

    if (cfg_.placement == KnotPlacement::Boundary) {
      const int J = cfg_.children_at(m + 1);
      std::vector<Index> sorted_rem = sorted_along(grid_, remaining, axis);
      const auto R = static_cast<long>(sorted_rem.size());
      if (R < 2L * J - 1)
        throw InfeasibleConfig("partition: region " + path_string(reg.path) + " has " +
                               std::to_string(R) + " unused points, too few for " +
                               std::to_string(J - 1) + " boundary knots and " +
                               std::to_string(J) + " children");
      std::vector<Index> knots;
      for (int c = 1; c < J; ++c) {
        const auto pos = static_cast<size_t>(std::lround(static_cast<double>(c) * R / J));
        knots.push_back(sorted_rem[pos]);
      }
      starts.push_back(0);
      for (Index k : knots) {
        auto it = std::find(sorted_all.begin(), sorted_all.end(), k);
        starts.push_back(static_cast<size_t>(it - sorted_all.begin()) + 1);
      }
      reg.knots = knots;
      std::sort(reg.knots.begin(), reg.knots.end());
      mark(reg.knots);
    } else {
      if (static_cast<long>(remaining.size()) < r)
        throw InfeasibleConfig("partition: region " + path_string(reg.path) + " has " +
                               std::to_string(remaining.size()) + " unused points but needs " +
                               std::to_string(r) + " knots at resolution " + std::to_string(m));
      reg.knots = pick_uniform_knots(grid_, reg.box, remaining, r);
      mark(reg.knots);
      std::vector<Index> rest;
      for (Index i : sorted_all)
        if (!used_[static_cast<size_t>(i)]) rest.push_back(i);
      const long R = static_cast<long>(rest.size());
      const long J = cfg_.singleton_finest ? R : cfg_.children_at(m + 1);
      if (R < J || R == 0)
        throw InfeasibleConfig("partition: region " + path_string(reg.path) + " leaves " +
                               std::to_string(R) + " unused points for " + std::to_string(J) +
                               " children");
      starts.push_back(0);
      for (long c = 1; c < J; ++c) {
        const Index first = rest[static_cast<size_t>(c * R / J)];
        auto it = std::find(sorted_all.begin(), sorted_all.end(), first);
        starts.push_back(static_cast<size_t>(it - sorted_all.begin()));
      }
    }

    std::vector<Region> kids;
    starts.push_back(sorted_all.size());
    for (size_t c = 0; c + 1 < starts.size(); ++c) {
      Region child;
      child.level = m + 1;
      child.path = reg.path;
      child.path.push_back(static_cast<int>(c) + 1);
      child.indices.assign(sorted_all.begin() + static_cast<long>(starts[c]),
                           sorted_all.begin() + static_cast<long>(starts[c + 1]));
      std::sort(child.indices.begin(), child.indices.end());
      kids.push_back(std::move(child));
    }
    return kids;
  }

  void mark(const std::vector<Index>& idx) {
    for (Index i : idx) used_[static_cast<size_t>(i)] = 1;
  }

  const Matrix& grid_;
  const PartitionConfig& cfg_;
  std::vector<char> used_;
};

}  // namespace

PartitionTree::PartitionTree(Index n, int dim, int levels, std::vector<Region> regions)
    : n_(n), dim_(dim), levels_(levels) {
  if (regions.empty()) throw InfeasibleConfig("partition: no regions");
  // canonical order: by level, then lexicographic path
  std::sort(regions.begin(), regions.end(), [](const Region& a, const Region& b) {
    if (a.level != b.level) return a.level < b.level;
    return a.path < b.path;
  });
  regions_ = std::move(regions);
  by_level_.assign(static_cast<size_t>(levels_) + 1, {});
  std::map<std::vector<int>, int> by_path;
  for (size_t id = 0; id < regions_.size(); ++id) {
    Region& r = regions_[id];
    if (r.level < 0 || r.level > levels_ || static_cast<int>(r.path.size()) != r.level)
      throw InfeasibleConfig("partition: region " + path_string(r.path) + " has inconsistent level");
    r.children.clear();
    by_path[r.path] = static_cast<int>(id);
    by_level_[static_cast<size_t>(r.level)].push_back(static_cast<int>(id));
  }
  if (by_level_[0].size() != 1) throw InfeasibleConfig("partition: need exactly one root region");
  for (size_t id = 0; id < regions_.size(); ++id) {
    Region& r = regions_[id];
    if (r.level == 0) {
      r.parent = -1;
      continue;
    }
    std::vector<int> ppath(r.path.begin(), r.path.end() - 1);
    auto it = by_path.find(ppath);
    if (it == by_path.end())
      throw InfeasibleConfig("partition: region " + path_string(r.path) + " has no parent");
    r.parent = it->second;
    regions_[static_cast<size_t>(r.parent)].children.push_back(static_cast<int>(id));
  }

  // nesting and knot partition
  std::vector<int> knot_owner(static_cast<size_t>(n_), -1);
  for (size_t id = 0; id < regions_.size(); ++id) {
    const Region& r = regions_[id];
    if (r.level < levels_ && r.children.empty())
      throw InfeasibleConfig("partition: region " + path_string(r.path) + " is not refined to the finest level");
    if (!r.children.empty()) {
      std::vector<Index> merged;
      for (int c : r.children) {
        const auto& ci = regions_[static_cast<size_t>(c)].indices;
        merged.insert(merged.end(), ci.begin(), ci.end());
      }
      std::sort(merged.begin(), merged.end());
      if (merged != r.indices)
        throw InfeasibleConfig("partition: children of " + path_string(r.path) + " do not partition it");
    }
    for (Index k : r.knots) {
      if (k < 0 || k >= n_ || !std::binary_search(r.indices.begin(), r.indices.end(), k))
        throw InfeasibleConfig("partition: knot outside region " + path_string(r.path));
      if (knot_owner[static_cast<size_t>(k)] != -1)
        throw InfeasibleConfig("partition: index " + std::to_string(k) + " is a knot twice");
      knot_owner[static_cast<size_t>(k)] = static_cast<int>(id);
    }
  }
  for (Index i = 0; i < n_; ++i)
    if (knot_owner[static_cast<size_t>(i)] == -1)
      throw InfeasibleConfig("partition: index " + std::to_string(i) + " is not a knot of any region");
  if (static_cast<Index>(regions_[static_cast<size_t>(by_level_[0][0])].indices.size()) != n_)
    throw InfeasibleConfig("partition: root must contain the whole grid");

  // internal row order: finest regions in path order
  perm_.clear();
  row_region_.assign(static_cast<size_t>(n_), -1);
  for (int f : by_level_.back()) {
    Region& r = regions_[static_cast<size_t>(f)];
    r.row_begin = static_cast<Index>(perm_.size());
    for (Index i : r.indices) {
      row_region_[perm_.size()] = f;
      perm_.push_back(i);
    }
    r.row_end = static_cast<Index>(perm_.size());
  }
  rank_.assign(static_cast<size_t>(n_), 0);
  for (size_t k = 0; k < perm_.size(); ++k) rank_[static_cast<size_t>(perm_[k])] = static_cast<Index>(k);
  for (int m = levels_ - 1; m >= 0; --m) {
    for (int id : by_level_[static_cast<size_t>(m)]) {
      Region& r = regions_[static_cast<size_t>(id)];
      r.row_begin = std::numeric_limits<Index>::max();
      r.row_end = 0;
      for (int c : r.children) {
        r.row_begin = std::min(r.row_begin, regions_[static_cast<size_t>(c)].row_begin);
        r.row_end = std::max(r.row_end, regions_[static_cast<size_t>(c)].row_end);
      }
      if (r.rows() != static_cast<Index>(r.indices.size()))
        throw InfeasibleConfig("partition: region " + path_string(r.path) + " is not contiguous");
    }
  }

  // columns: resolution M first
  col_row_.assign(static_cast<size_t>(n_), 0);
  col_region_.assign(static_cast<size_t>(n_), 0);
  Index col = 0;
  for (int m = levels_; m >= 0; --m) {
    for (int id : by_level_[static_cast<size_t>(m)]) {
      Region& r = regions_[static_cast<size_t>(id)];
      r.col_begin = col;
      r.knot_rows.clear();
      for (Index k : r.knots) r.knot_rows.push_back(rank_[static_cast<size_t>(k)]);
      std::sort(r.knot_rows.begin(), r.knot_rows.end());
      for (Index row : r.knot_rows) {
        col_row_[static_cast<size_t>(col)] = row;
        col_region_[static_cast<size_t>(col)] = id;
        ++col;
      }
    }
  }

  for (size_t id = 0; id < regions_.size(); ++id) {
    Region& r = regions_[id];
    r.chain.clear();
    r.chain_offset.clear();
    Index off = 0;
    for (int a = static_cast<int>(id); a != -1; a = regions_[static_cast<size_t>(a)].parent) {
      r.chain.push_back(a);
      r.chain_offset.push_back(off);
      off += regions_[static_cast<size_t>(a)].num_knots();
    }
    r.support = off;
    if (r.level == levels_) max_support_ = std::max(max_support_, off);
  }
}

bool PartitionTree::contains(int a, int b) const {
  for (int x = b; x != -1; x = regions_[static_cast<size_t>(x)].parent)
    if (x == a) return true;
  return false;
}

Vector PartitionTree::to_internal(const Vector& v) const {
  require_dim(v.size() == n_, "to_internal: vector length differs from grid size");
  Vector out(n_);
  for (Index k = 0; k < n_; ++k) out[k] = v[perm_[static_cast<size_t>(k)]];
  return out;
}

Vector PartitionTree::to_original(const Vector& v) const {
  require_dim(v.size() == n_, "to_original: vector length differs from grid size");
  Vector out(n_);
  for (Index k = 0; k < n_; ++k) out[perm_[static_cast<size_t>(k)]] = v[k];
  return out;
}

Matrix PartitionTree::rows_to_internal(const Matrix& m) const {
  require_dim(m.rows() == n_, "rows_to_internal: row count differs from grid size");
  Matrix out(m.rows(), m.cols());
  for (Index k = 0; k < n_; ++k) out.row(k) = m.row(perm_[static_cast<size_t>(k)]);
  return out;
}

Matrix PartitionTree::rows_to_original(const Matrix& m) const {
  require_dim(m.rows() == n_, "rows_to_original: row count differs from grid size");
  Matrix out(m.rows(), m.cols());
  for (Index k = 0; k < n_; ++k) out.row(perm_[static_cast<size_t>(k)]) = m.row(k);
  return out;
}

SparseMatrix PartitionTree::sym_to_internal(const SparseMatrix& a) const {
  require_dim(a.rows() == n_ && a.cols() == n_, "sym_to_internal: matrix must be n x n");
  std::vector<Triplet> t;
  t.reserve(static_cast<size_t>(a.nonZeros()));
  for (Index c = 0; c < a.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(a, c); it; ++it)
      t.emplace_back(rank_[static_cast<size_t>(it.row())], rank_[static_cast<size_t>(it.col())], it.value());
  SparseMatrix out(n_, n_);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

SparseMatrix PartitionTree::cols_to_internal(const SparseMatrix& a) const {
  require_dim(a.cols() == n_, "cols_to_internal: column count differs from grid size");
  std::vector<Triplet> t;
  t.reserve(static_cast<size_t>(a.nonZeros()));
  for (Index c = 0; c < a.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(a, c); it; ++it)
      t.emplace_back(it.row(), rank_[static_cast<size_t>(it.col())], it.value());
  SparseMatrix out(a.rows(), n_);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

std::string PartitionTree::describe_path(int region) const {
  return path_string(regions_[static_cast<size_t>(region)].path);
}

TreePtr build_partition(const Matrix& grid, const PartitionConfig& config) {
  config.validate();
  if (grid.rows() == 0) throw InfeasibleConfig("partition: empty grid");
  if (config.placement == KnotPlacement::Boundary && grid.cols() != 1)
    throw InfeasibleConfig("boundary knot placement is defined for one-dimensional grids only");
  Builder builder(grid, config);
  auto regions = builder.run();
  return std::make_shared<const PartitionTree>(grid.rows(), static_cast<int>(grid.cols()),
                                               config.levels, std::move(regions));
}

TreePtr build_singleton_tree(const Matrix& grid, int root_knots) {
  PartitionConfig cfg;
  if (root_knots >= grid.rows()) {
    // nothing left for a second resolution: the single full-rank region
    cfg.levels = 0;
    cfg.knots = {static_cast<int>(grid.rows())};
    return build_partition(grid, cfg);
  }
  cfg.levels = 1;
  cfg.knots = {root_knots, 1};
  cfg.singleton_finest = true;
  return build_partition(grid, cfg);
}

}  // namespace mrf
