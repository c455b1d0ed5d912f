#pragma once

#include "mrf/common.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mrf {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for a (root, id...) tuple.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = splitmix64(root);
  for (std::uint64_t id : ids) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> ids) {
  return Rng(derive_seed(root, ids));
}

inline Vector standard_normal(Index n, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = z(rng);
  return v;
}

inline Matrix standard_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = z(rng);
  return m;
}

}  // namespace mrf
