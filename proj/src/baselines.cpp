#include "mrf/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace mrf {

namespace {

double taper_value(TaperFamily f, double h) { return f == TaperFamily::Kanter ? kanter(h) : wendland2(h); }

}  // namespace

Taper make_taper(const Matrix& grid, Metric metric, Index target_nnz, TaperFamily family) {
  const Index n = grid.rows();
  if (target_nnz < 1) throw Error("taper needs a positive nnz target");
  // reference point: closest to the centroid, so boundary effects do not bias the count
  const Eigen::RowVectorXd centre = grid.colwise().mean();
  Index ref = 0;
  if (metric == Metric::Euclidean) (grid.rowwise() - centre).rowwise().squaredNorm().minCoeff(&ref);
  std::vector<double> d(static_cast<size_t>(n));
  for (Index j = 0; j < n; ++j) d[static_cast<size_t>(j)] = distance(grid, ref, j, metric);
  std::sort(d.begin(), d.end());

  // distinct distance shells and the counts they realise
  const double eps = 1e-9;
  Index best_count = -1;
  double best_level = 0.0, next_level = 0.0;
  for (size_t k = 0; k < d.size();) {
    size_t e = k;
    while (e < d.size() && d[e] <= d[k] + eps) ++e;
    const auto count = static_cast<Index>(e);
    const bool better = best_count < 0 || std::abs(count - target_nnz) < std::abs(best_count - target_nnz);
    if (better) {
      best_count = count;
      best_level = d[e - 1];
      next_level = e < d.size() ? d[e] : d[e - 1] * 1.5 + 1.0;
    }
    if (count >= target_nnz) break;
    k = e;
  }

  Taper tp;
  tp.family = family;
  tp.radius = 0.5 * (best_level + next_level);
  tp.row_nnz = best_count;
  std::vector<Triplet> trip;
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) {
      const double dist = distance(grid, i, j, metric);
      if (dist < tp.radius) trip.emplace_back(i, j, taper_value(family, dist / tp.radius));
    }
  tp.matrix.resize(n, n);
  tp.matrix.setFromTriplets(trip.begin(), trip.end());
  return tp;
}

Vector Ensemble::mean() const { return members.rowwise().mean(); }

Matrix Ensemble::sample_covariance() const {
  const Matrix X = members.colwise() - mean();
  return X * X.transpose() / static_cast<double>(size() - 1);
}

EnsembleKalmanFilter::EnsembleKalmanFilter(const StateSpaceModel& model, Index ensemble_size,
                                           std::optional<Taper> taper)
    : model_(model), ne_(ensemble_size), taper_(std::move(taper)) {
  model_.validate();
  if (ne_ < 2) throw Error("ensemble needs at least two members");
  L0_ = sampling_factor(model_.sigma0->dense(), "Sigma0");
  if (model_.innovation) LQ_ = sampling_factor(model_.innovation->dense(), "Q");
}

Ensemble EnsembleKalmanFilter::initial(Rng& rng) const {
  Ensemble e;
  e.members = (L0_ * standard_normal(model_.size(), ne_, rng)).colwise() + model_.mu0;
  return e;
}

Ensemble EnsembleKalmanFilter::predict(const Ensemble& ens, int t, Rng& rng) const {
  const SparseMatrix A = model_.A(t);
  Ensemble out;
  out.t = t;
  out.members = A * ens.members;
  if (model_.offset) out.members.colwise() += model_.offset(t);
  if (model_.innovation) out.members += LQ_ * standard_normal(model_.size(), ne_, rng);
  return out;
}

SparseMatrix EnsembleKalmanFilter::tapered_covariance(const Ensemble& ens) const {
  const Matrix X = (ens.members.colwise() - ens.mean()) / std::sqrt(static_cast<double>(ens.size() - 1));
  if (!taper_) return Matrix(X * X.transpose()).sparseView();
  SparseMatrix C = taper_->matrix;
  for (Index j = 0; j < C.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(C, j); it; ++it) it.valueRef() *= X.row(it.row()).dot(X.row(j));
  return C;
}

Ensemble EnsembleKalmanFilter::update(const Ensemble& prior, const Observation& obs, const Vector& y, Rng& rng) const {
  const Index nt = obs.size();
  require_dim(y.size() == nt, "enkf update: y and H disagree in length");
  if (nt == 0) return prior;
  const SparseMatrix C = tapered_covariance(prior);
  const Matrix PHt = C * Matrix(obs.H.transpose());  // n x nt
  Matrix S = obs.H * PHt;
  S += Matrix(obs.R);
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("EnKF innovation covariance not positive definite", -1);
  const Matrix LR = sampling_factor(Matrix(obs.R), "R");
  Matrix innov = (-(obs.H * prior.members)).colwise() + y;
  innov += LR * standard_normal(nt, ne_, rng);
  Ensemble out = prior;
  out.members += PHt * llt.solve(innov);
  return out;
}

Ensemble EnsembleKalmanFilter::step(const Ensemble& prev, const Observation& obs, const Vector& y, int t,
                                    Rng& rng) const {
  return update(predict(prev, t, rng), obs, y, rng);
}

TreePtr make_lrf_tree(const Matrix& grid, int knots) { return build_singleton_tree(grid, knots); }

MraFilter::MraFilter(const StateSpaceModel& model, const TreePtr& tree)
    : model_(model), prior_(mrf_initialize(model, tree)) {}

FilterMoments MraFilter::step(const Observation& obs, const Vector& y, int t) {
  prior_ = mrf_predict(model_, prior_, t);
  UpdateResult u = mrf_update(prior_, obs, y);
  u.posterior.t = t;
  return std::move(u.posterior);
}

}  // namespace mrf
