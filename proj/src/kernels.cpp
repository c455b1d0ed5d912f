#include "mrf/kernels.hpp"

#include <cmath>

namespace mrf {

double distance(const Matrix& grid, Index i, Index j, Metric metric) {
  if (metric == Metric::Circular) {
    // chord length, so every kernel valid in the plane stays positive definite
    const double d = std::abs(grid(i, 0) - grid(j, 0));
    return std::sin(M_PI * std::min(d, 1.0 - d)) / M_PI;
  }
  return (grid.row(i) - grid.row(j)).norm();
}

double MaternKernel::operator()(double d) const {
  const double s = d / range;
  if (nu == 0.5) return variance * std::exp(-s);
  const double a = std::sqrt(3.0) * s;
  return variance * (1.0 + a) * std::exp(-a);
}

void MaternKernel::validate() const {
  if (nu != 0.5 && nu != 1.5) throw Error("Matern smoothness must be 0.5 or 1.5");
  if (!(range > 0.0)) throw Error("Matern range must be positive");
  if (!(variance >= 0.0)) throw Error("Matern variance must be non-negative");
}

double kanter(double h) {
  h = std::abs(h);
  if (h >= 1.0) return 0.0;
  if (h < 1e-12) return 1.0;
  const double x = 2.0 * M_PI * h;
  return (1.0 - h) * std::sin(x) / x + (1.0 - std::cos(x)) / (M_PI * x);
}

double wendland2(double h) {
  h = std::abs(h);
  if (h >= 1.0) return 0.0;
  return std::pow(1.0 - h, 6) * (35.0 * h * h + 18.0 * h + 3.0) / 3.0;
}

Matrix kernel_matrix(const Matrix& grid, const MaternKernel& kernel) {
  const Index n = grid.rows();
  Matrix k(n, n);
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) k(i, j) = kernel(distance(grid, i, j, kernel.metric));
  return k;
}

}  // namespace mrf
