#pragma once

#include "mrf/blocksparse.hpp"
#include "mrf/common.hpp"
#include "mrf/partition.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mrf {

/// Matrix Market coordinate real general.
void write_matrix_market(const std::string& path, const SparseMatrix& m);
SparseMatrix read_matrix_market(const std::string& path);

/// Tree layout: {"n", "dim", "levels", "perm", "regions": [{"path", "indices",
/// "knots", "box": {"lo", "hi"}}]}. Indices are 0-based user indices.
void write_tree_json(const std::string& path, const PartitionTree& tree);
TreePtr read_tree_json(const std::string& path);
std::string tree_to_json(const PartitionTree& tree);
TreePtr tree_from_json(const std::string& text);

/// (row, col) of every stored entry, one per line, with a header.
void write_pattern_csv(const std::string& path, const SparseMatrix& m);

/// Dense matrix as CSV with the given header (may be empty).
void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& m);

/// Fixed-format double for byte-stable CSV output.
std::string format_double(double v);

void ensure_directory(const std::string& path);

}  // namespace mrf
