#include "doctest.h"
#include "fixtures.hpp"

#include <map>

using namespace mrf;

namespace {

Index knots_at_level(const PartitionTree& t, int m) {
  Index s = 0;
  for (int id : t.level_regions(m)) s += t.region(id).num_knots();
  return s;
}

void check_invariants(const PartitionTree& t, const PartitionConfig& cfg) {
  Index total = 0;
  std::vector<int> owner(static_cast<size_t>(t.size()), 0);
  for (const auto& r : t.regions()) {
    total += r.num_knots();
    for (Index k : r.knots) {
      CHECK(std::binary_search(r.indices.begin(), r.indices.end(), k));
      ++owner[static_cast<size_t>(k)];
    }
    if (r.level < t.levels()) {
      CHECK(r.num_knots() == cfg.knots_at(r.level));
      std::vector<Index> merged;
      for (int c : r.children) {
        const auto& ci = t.region(c).indices;
        merged.insert(merged.end(), ci.begin(), ci.end());
      }
      std::sort(merged.begin(), merged.end());
      CHECK(merged == r.indices);
    } else {
      // contiguity after reordering
      Index lo = t.size(), hi = -1;
      for (Index i : r.indices) {
        lo = std::min(lo, t.rank()[static_cast<size_t>(i)]);
        hi = std::max(hi, t.rank()[static_cast<size_t>(i)]);
      }
      CHECK(hi - lo + 1 == static_cast<Index>(r.indices.size()));
    }
  }
  CHECK(total == t.size());
  for (int c : owner) CHECK(c == 1);
}

}  // namespace

TEST_CASE("fig1 tree: 40 regions, 26 coarse knots, 2 per finest region") {
  PartitionConfig c;
  c.levels = 3;
  c.children = {3};
  c.knots = {2};
  const auto t = build_partition(fx::line_grid(80), c);
  CHECK(t->regions().size() == 40);
  CHECK(knots_at_level(*t, 0) == 2);
  CHECK(knots_at_level(*t, 1) == 6);
  CHECK(knots_at_level(*t, 2) == 18);
  CHECK(knots_at_level(*t, 3) == 54);
  for (int f : t->finest()) CHECK(t->region(f).num_knots() == 2);
  CHECK(t->max_support() == 8);
  check_invariants(*t, c);
}

TEST_CASE("34x34 grid with per-level J and r") {
  PartitionConfig c;
  c.levels = 4;
  c.children = {2, 4, 4, 4};
  c.knots = {16, 8, 6, 6, 6};
  const auto t = build_partition(fx::square_grid(34, 34), c);
  CHECK(t->regions().size() == 171);
  CHECK(knots_at_level(*t, 0) + knots_at_level(*t, 1) + knots_at_level(*t, 2) + knots_at_level(*t, 3) == 272);
  CHECK(knots_at_level(*t, 4) == 884);
  check_invariants(*t, c);
}

TEST_CASE("single-region tree holds every index as a knot") {
  PartitionConfig c;
  c.levels = 0;
  c.knots = {30};
  const auto t = build_partition(fx::line_grid(30), c);
  REQUIRE(t->regions().size() == 1);
  CHECK(t->region(0).num_knots() == 30);
  for (Index i = 0; i < 30; ++i) CHECK(t->perm()[static_cast<size_t>(i)] == i);
}

TEST_CASE("lexicographic order of finest regions") {
  const auto t = fx::fig1_tree();
  const auto& fin = t->finest();
  for (size_t k = 1; k < fin.size(); ++k) {
    CHECK(t->region(fin[k - 1]).path < t->region(fin[k]).path);
    CHECK(t->region(fin[k - 1]).row_end == t->region(fin[k]).row_begin);
  }
}

TEST_CASE("reorder round trip and brute-force permutation") {
  const auto t = fx::fig1_tree();
  Rng rng(7);
  const Vector v = standard_normal(80, rng);
  CHECK((t->to_original(t->to_internal(v)) - v).cwiseAbs().maxCoeff() == 0.0);

  // enumerate finest regions by path, concatenate their sorted indices
  std::map<std::vector<int>, std::vector<Index>> leaves;
  for (const auto& r : t->regions())
    if (r.level == t->levels()) leaves[r.path] = r.indices;
  std::vector<Index> brute;
  for (const auto& [path, idx] : leaves) brute.insert(brute.end(), idx.begin(), idx.end());
  CHECK(brute == t->perm());

  const Vector vi = t->to_internal(v);
  for (Index i = 0; i < 80; ++i) CHECK(vi[i] == v[brute[static_cast<size_t>(i)]]);
  const Matrix m = standard_normal(80, 3, rng);
  CHECK((t->rows_to_original(t->rows_to_internal(m)) - m).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(t->to_internal(Vector::Zero(79)), DimensionError);
}

TEST_CASE("determinism: identical inputs give identical trees") {
  const auto a = fx::fig1_tree();
  const auto b = fx::fig1_tree();
  CHECK(a->perm() == b->perm());
  for (size_t k = 0; k < a->regions().size(); ++k) CHECK(a->regions()[k].knots == b->regions()[k].knots);
}

TEST_CASE("infeasible configuration names the region") {
  PartitionConfig c;
  c.levels = 3;
  c.children = {3};
  c.knots = {2};
  try {
    build_partition(fx::line_grid(12), c);
    FAIL("expected InfeasibleConfig");
  } catch (const InfeasibleConfig& e) {
    CHECK(std::string(e.what()).find('(') != std::string::npos);
  }
  PartitionConfig bad;
  bad.levels = 2;
  bad.children = {1};
  bad.knots = {2};
  CHECK_THROWS_AS(build_partition(fx::line_grid(40), bad), InfeasibleConfig);
}

TEST_CASE("boundary knots sit at child boundaries") {
  const auto t = fx::boundary_tree();
  for (const auto& r : t->regions()) {
    if (r.level == t->levels()) continue;
    REQUIRE(r.num_knots() == 2);
    // each knot is the last point of a child (children 1 and 2)
    for (size_t c = 0; c < 2; ++c) {
      const auto& child = t->region(r.children[c]).indices;
      CHECK(std::find(child.begin(), child.end(), r.knots[c]) != child.end());
      CHECK(r.knots[c] == child.back());
    }
  }
}

TEST_CASE("singleton tree: r0 knots, every other point alone") {
  const Matrix g = fx::line_grid(80);
  const auto t = build_singleton_tree(g, 8);
  CHECK(t->levels() == 1);
  CHECK(t->region(0).num_knots() == 8);
  for (int f : t->finest()) CHECK(t->region(f).num_knots() == 1);
  CHECK(t->finest().size() == 72);
  CHECK(t->max_support() == 9);
  const auto full = build_singleton_tree(g, 80);
  CHECK(full->levels() == 0);
}
