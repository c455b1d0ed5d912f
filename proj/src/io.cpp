#include "mrf/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mrf {

using json = nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  return os;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void ensure_directory(const std::string& path) {
  if (path.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw Error("cannot create directory " + path + ": " + ec.message());
}

void write_matrix_market(const std::string& path, const SparseMatrix& m) {
  auto os = open_out(path);
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  char buf[64];
  for (Index c = 0; c < m.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) {
      std::snprintf(buf, sizeof buf, "%.17g", it.value());
      os << it.row() + 1 << ' ' << c + 1 << ' ' << buf << '\n';
    }
}

SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw Error(path + ": missing MatrixMarket banner");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (object != "matrix" || format != "coordinate") throw Error(path + ": only coordinate matrices are supported");
  const bool pattern = field == "pattern";
  const bool symmetric = symmetry == "symmetric";
  if (!pattern && field != "real" && field != "integer") throw Error(path + ": unsupported field " + field);
  while (std::getline(is, line))
    if (!line.empty() && line[0] != '%') break;
  Index rows = 0, cols = 0, nnz = 0;
  std::istringstream dims(line);
  if (!(dims >> rows >> cols >> nnz)) throw Error(path + ": bad size line");
  std::vector<Triplet> t;
  t.reserve(static_cast<size_t>(symmetric ? 2 * nnz : nnz));
  for (Index k = 0; k < nnz; ++k) {
    Index i = 0, j = 0;
    double v = 1.0;
    if (!(is >> i >> j)) throw Error(path + ": truncated entry list");
    if (!pattern && !(is >> v)) throw Error(path + ": truncated entry list");
    if (i < 1 || i > rows || j < 1 || j > cols) throw Error(path + ": entry out of range");
    t.emplace_back(i - 1, j - 1, v);
    if (symmetric && i != j) t.emplace_back(j - 1, i - 1, v);
  }
  SparseMatrix m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

std::string tree_to_json(const PartitionTree& tree) {
  json j;
  j["n"] = tree.size();
  j["dim"] = tree.dim();
  j["levels"] = tree.levels();
  j["perm"] = tree.perm();
  json regs = json::array();
  for (const auto& r : tree.regions()) {
    json jr;
    jr["path"] = r.path;
    jr["indices"] = r.indices;
    jr["knots"] = r.knots;
    jr["box"] = {{"lo", r.box.lo}, {"hi", r.box.hi}};
    regs.push_back(std::move(jr));
  }
  j["regions"] = std::move(regs);
  return j.dump(1);
}

TreePtr tree_from_json(const std::string& text) {
  const json j = json::parse(text);
  const auto n = j.at("n").get<Index>();
  const int dim = j.at("dim").get<int>();
  const int levels = j.at("levels").get<int>();
  std::vector<Region> regions;
  for (const auto& jr : j.at("regions")) {
    Region r;
    r.path = jr.at("path").get<std::vector<int>>();
    r.level = static_cast<int>(r.path.size());
    r.indices = jr.at("indices").get<std::vector<Index>>();
    r.knots = jr.at("knots").get<std::vector<Index>>();
    std::sort(r.indices.begin(), r.indices.end());
    std::sort(r.knots.begin(), r.knots.end());
    if (jr.contains("box")) {
      r.box.lo = jr["box"].at("lo").get<std::vector<double>>();
      r.box.hi = jr["box"].at("hi").get<std::vector<double>>();
    }
    regions.push_back(std::move(r));
  }
  auto tree = std::make_shared<const PartitionTree>(n, dim, levels, std::move(regions));
  if (j.contains("perm") && j["perm"].get<std::vector<Index>>() != tree->perm())
    throw Error("tree JSON: stored perm disagrees with the ordering derived from the regions");
  return tree;
}

void write_tree_json(const std::string& path, const PartitionTree& tree) {
  auto os = open_out(path);
  os << tree_to_json(tree) << '\n';
}

TreePtr read_tree_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return tree_from_json(ss.str());
}

void write_pattern_csv(const std::string& path, const SparseMatrix& m) {
  auto os = open_out(path);
  os << "row,col\n";
  for (Index c = 0; c < m.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) os << it.row() << ',' << c << '\n';
}

void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& m) {
  auto os = open_out(path);
  for (size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
  if (!header.empty()) os << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << format_double(m(i, j));
    os << '\n';
  }
}

}  // namespace mrf
