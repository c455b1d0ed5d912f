#pragma once

#include "mrf/common.hpp"

#include <cmath>

namespace mrf::detail {

// In-place lower Cholesky reading only the lower triangle. Returns the first
// pivot whose squared value is not above threshold, or -1 on success.
inline Index cholesky_lower_inplace(Matrix& a, double threshold) {
  const Index k = a.rows();
  for (Index j = 0; j < k; ++j) {
    double d = a(j, j) - a.row(j).head(j).squaredNorm();
    if (!(d > threshold)) return j;
    d = std::sqrt(d);
    a(j, j) = d;
    for (Index i = j + 1; i < k; ++i)
      a(i, j) = (a(i, j) - a.row(i).head(j).dot(a.row(j).head(j))) / d;
  }
  a.triangularView<Eigen::StrictlyUpper>().setZero();
  return -1;
}

}  // namespace mrf::detail
