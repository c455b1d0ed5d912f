#include "doctest.h"
#include "fixtures.hpp"

#include "mrf/metrics.hpp"

using namespace mrf;

TEST_CASE("KL divergence closed forms") {
  Rng rng(2);
  const Matrix S = fx::random_spd(6, rng);
  const Vector mu = standard_normal(6, rng);
  const GaussianReference ref(mu, S);
  CHECK(kl_gaussian(ref, mu, S) == doctest::Approx(0.0).epsilon(1e-12));

  // KL(N(0,1) ‖ N(1,2)) = ½(½ + ½ − 1 + ln 2)
  Vector a(1), b(1);
  a << 0.0;
  b << 1.0;
  Matrix sa(1, 1), sb(1, 1);
  sa << 1.0;
  sb << 2.0;
  CHECK(kl_gaussian(a, sa, b, sb) == doctest::Approx(0.5 * std::log(2.0)));

  // scaled covariance: ½(n/c − n + n ln c)
  const double c = 3.0;
  CHECK(kl_gaussian(ref, mu, c * S) == doctest::Approx(0.5 * (6.0 / c - 6.0 + 6.0 * std::log(c))));
  CHECK(kl_gaussian(mu, S, mu, c * S) == doctest::Approx(kl_gaussian(ref, mu, c * S)));
}

TEST_CASE("RMSPE ratio") {
  Vector x(4), kf(4), a(4);
  x << 0, 0, 0, 0;
  kf << 1, 1, 1, 1;
  a << 2, 2, 2, 2;
  CHECK(rmspe_ratio(x, a, kf) == doctest::Approx(2.0));
  CHECK(rmspe_ratio(x, kf, kf) == doctest::Approx(1.0));
  CHECK_THROWS_AS(rmspe_ratio(x, a, x), Error);
}

TEST_CASE("RASD") {
  std::vector<Vector> ap{Vector::Constant(2, 2.0), Vector::Constant(2, 4.0)};
  std::vector<Vector> kf{Vector::Constant(2, 1.0), Vector::Constant(2, 1.0)};
  // squared differences: 1, 1, 9, 9
  const auto r = rasd(ap, kf);
  CHECK(r.root_mean == doctest::Approx(std::sqrt(5.0)));
  CHECK(r.root_sum == doctest::Approx(std::sqrt(20.0)));
}

TEST_CASE("normal quantile and coverage") {
  CHECK(normal_interval_z(0.9) == doctest::Approx(1.6448536269514722).epsilon(1e-9));
  CHECK(normal_interval_z(0.95) == doctest::Approx(1.959963984540054).epsilon(1e-9));
  Vector mu = Vector::Zero(4), var = Vector::Ones(4), x(4);
  x << 0.0, 1.6, 1.7, -3.0;
  CHECK(coverage(mu, var, x, 0.9) == doctest::Approx(0.5));

  // Monte Carlo: calibrated Gaussian covers about 90 %
  Rng rng(17);
  const Vector z = standard_normal(20000, rng);
  CHECK(coverage(Vector::Zero(20000), Vector::Ones(20000), z, 0.9) == doctest::Approx(0.9).epsilon(0.01));
}

TEST_CASE("dense reference refuses oversized input") {
  CHECK_THROWS_AS(GaussianReference(Vector::Zero(10), Matrix::Identity(10, 10), 5), DimensionError);
}
