#pragma once

#include "mrf/common.hpp"

namespace mrf {

enum class Metric {
  Euclidean,
  /// 1D points on a circle of unit circumference (coordinates in [0, 1)),
  /// measured by chord length.
  Circular,
};

double distance(const Matrix& grid, Index i, Index j, Metric metric);

/// Matérn covariance with ν ∈ {0.5, 1.5}.
struct MaternKernel {
  double nu = 0.5;
  double range = 0.1;
  double variance = 1.0;
  Metric metric = Metric::Euclidean;

  double operator()(double d) const;
  void validate() const;
};

/// Kanter's compactly supported correlation, h = d / radius.
double kanter(double h);
/// Wendland ψ_{3,2}-type correlation (C^4), h = d / radius.
double wendland2(double h);

enum class TaperFamily { Kanter, Wendland };

Matrix kernel_matrix(const Matrix& grid, const MaternKernel& kernel);

}  // namespace mrf
