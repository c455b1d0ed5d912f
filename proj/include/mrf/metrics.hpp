#pragma once

#include "mrf/common.hpp"

#include <vector>

namespace mrf {

/// Precomputed Cholesky of the exact covariance, reused across methods.
struct GaussianReference {
  Vector mu;
  Matrix Sigma;
  Eigen::LLT<Matrix> llt;
  double log_det = 0.0;

  GaussianReference(Vector mean, Matrix cov, Index dense_limit = 4000);
};

/// KL(exact ‖ approx) between two Gaussians.
double kl_gaussian(const GaussianReference& exact, const Vector& mu_a, const Matrix& Sigma_a);
double kl_gaussian(const Vector& mu_e, const Matrix& Sigma_e, const Vector& mu_a, const Matrix& Sigma_a);

/// RMS(μ̂ - x) / RMS(μ_KF - x).
double rmspe_ratio(const Vector& truth, const Vector& approx, const Vector& kf);

struct Rasd {
  double root_mean = 0.0;  ///< sqrt of the average over all (t, i)
  double root_sum = 0.0;   ///< sqrt of the plain sum
};

Rasd rasd(const std::vector<Vector>& approx, const std::vector<Vector>& kf);

/// Two-sided standard-normal quantile z with P(|Z| ≤ z) = level.
double normal_interval_z(double level);

/// Fraction of points with truth inside μ ± z·sd.
double coverage(const Vector& mu, const Vector& variance, const Vector& truth, double level);

}  // namespace mrf
