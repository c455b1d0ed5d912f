#include "mrf/metrics.hpp"

#include <cmath>

namespace mrf {

GaussianReference::GaussianReference(Vector mean, Matrix cov, Index dense_limit)
    : mu(std::move(mean)), Sigma(std::move(cov)) {
  require_dim(Sigma.rows() == mu.size() && Sigma.cols() == mu.size(), "GaussianReference: shape mismatch");
  if (mu.size() > dense_limit) throw DimensionError("KL reference refused above the dense limit");
  llt.compute(Sigma);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("exact covariance is not positive definite", -1);
  log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double kl_gaussian(const GaussianReference& exact, const Vector& mu_a, const Matrix& Sigma_a) {
  const Index n = exact.mu.size();
  require_dim(mu_a.size() == n && Sigma_a.rows() == n && Sigma_a.cols() == n, "kl_gaussian: shape mismatch");
  Eigen::LLT<Matrix> la(Sigma_a);
  if (la.info() != Eigen::Success) throw NotPositiveDefinite("approximate covariance is not positive definite", -1);
  // tr(Σa^{-1} Σe) = ‖La^{-1} Le‖_F²
  const Matrix Le = exact.llt.matrixL();
  const Matrix X = la.matrixL().solve(Le);
  const Vector d = la.matrixL().solve(mu_a - exact.mu);
  const double log_det_a = 2.0 * la.matrixLLT().diagonal().array().log().sum();
  const double kl = 0.5 * (X.squaredNorm() + d.squaredNorm() - static_cast<double>(n) + log_det_a - exact.log_det);
  return std::max(kl, 0.0);
}

double kl_gaussian(const Vector& mu_e, const Matrix& Sigma_e, const Vector& mu_a, const Matrix& Sigma_a) {
  return kl_gaussian(GaussianReference(mu_e, Sigma_e, std::max<Index>(4000, mu_e.size())), mu_a, Sigma_a);
}

double rmspe_ratio(const Vector& truth, const Vector& approx, const Vector& kf) {
  require_dim(truth.size() == approx.size() && truth.size() == kf.size(), "rmspe_ratio: length mismatch");
  const double denom = (kf - truth).norm();
  if (denom == 0.0) throw Error("rmspe_ratio: exact filter error is zero");
  return (approx - truth).norm() / denom;
}

Rasd rasd(const std::vector<Vector>& approx, const std::vector<Vector>& kf) {
  require_dim(approx.size() == kf.size(), "rasd: different numbers of time points");
  double sum = 0.0;
  Index count = 0;
  for (size_t t = 0; t < approx.size(); ++t) {
    require_dim(approx[t].size() == kf[t].size(), "rasd: length mismatch at a time point");
    sum += (approx[t] - kf[t]).squaredNorm();
    count += approx[t].size();
  }
  Rasd r;
  r.root_sum = std::sqrt(sum);
  r.root_mean = count ? std::sqrt(sum / static_cast<double>(count)) : 0.0;
  return r;
}

double normal_interval_z(double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error("interval level must lie in (0, 1)");
  // P(|Z| <= z) = erf(z / sqrt 2); bisection is plenty here
  double lo = 0.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (std::erf(mid / std::sqrt(2.0)) < level)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double coverage(const Vector& mu, const Vector& variance, const Vector& truth, double level) {
  require_dim(mu.size() == variance.size() && mu.size() == truth.size(), "coverage: length mismatch");
  if (mu.size() == 0) return 0.0;
  const double z = normal_interval_z(level);
  Index hit = 0;
  for (Index i = 0; i < mu.size(); ++i) {
    const double half = z * std::sqrt(std::max(variance[i], 0.0));
    if (std::abs(truth[i] - mu[i]) <= half) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(mu.size());
}

}  // namespace mrf
