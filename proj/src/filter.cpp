#include "mrf/filter.hpp"

#include <cmath>

namespace mrf {

namespace {
const double kLog2Pi = std::log(2.0 * M_PI);
}

Vector FilterMoments::mean() const { return tree().to_original(mu); }
Vector FilterMoments::variance() const { return tree().to_original(B.implied_variance()); }
Matrix FilterMoments::covariance() const { return B.covariance_original(); }

FilterMoments mrf_initialize(const StateSpaceModel& model, const TreePtr& tree) {
  model.validate();
  require_dim(model.size() == tree->size(), "mrf_initialize: tree and model sizes differ");
  FilterMoments m;
  m.mu = tree->to_internal(model.mu0);
  m.B = mrd(*model.sigma0, tree);
  m.t = 0;
  return m;
}

FilterMoments mrf_predict(const StateSpaceModel& model, const FilterMoments& prev, int t) {
  const PartitionTree& tree = prev.tree();
  const SparseMatrix A = tree.sym_to_internal(model.A(t));
  FilterMoments out;
  out.t = t;
  out.mu = A * prev.mu;
  if (model.offset) out.mu += tree.to_internal(model.offset(t));
  if (model.scalar_evolution) {
    const double c = *model.scalar_evolution;
    if (c < 0.0) throw Error("scalar evolution needs c >= 0");
    out.B = prev.B.scaled(std::sqrt(c));
    return out;
  }
  RowSparseMatrix bf = evolve_factor(A, prev.B, model.evolution_row_budget);
  const ForecastCovariance sigma(std::move(bf), prev.B.tree_ptr(), model.innovation);
  out.B = mrd(sigma, prev.B.tree_ptr());
  return out;
}

UpdateResult mrf_update(const FilterMoments& prior, const Observation& obs, const Vector& y) {
  const PartitionTree& tree = prior.tree();
  require_dim(y.size() == obs.size(), "mrf_update: y and H disagree in length");
  UpdateResult res;
  res.n_obs = obs.size();
  if (obs.size() == 0) {
    res.posterior = prior;
    res.ytilde = Vector();
    return res;
  }
  const ObservationBlocks blocks = split_observations(tree, tree.cols_to_internal(obs.H), obs.R);
  const InnerProductMatrix lambda = build_lambda(prior.B, blocks);
  CholeskyFactors chol = cholesky_and_invert(lambda);
  res.posterior.B = apply_inverse_transpose(prior.B, chol.Linv);
  res.posterior.t = prior.t;

  const Vector r = y - blocks.apply_H(prior.mu);
  res.ytilde = res.posterior.B.multiply_transpose(blocks.weighted_back_projection(r));
  res.posterior.mu = prior.mu + res.posterior.B.multiply(res.ytilde);
  res.log_det_L = chol.log_det();
  res.log_det_R = blocks.log_det_R;
  res.weighted_residual = blocks.weighted_norm2(r);
  res.jittered = chol.jittered;
  res.L = std::move(chol.L);
  res.Linv = std::move(chol.Linv);
  return res;
}

StepResult mrf_step(const StateSpaceModel& model, const FilterMoments& prev, const Observation& obs,
                    const Vector& y, int t) {
  StepResult s;
  s.prior = mrf_predict(model, prev, t);
  s.update = mrf_update(s.prior, obs, y);
  return s;
}

FilterMoments mrf_forecast(const FilterMoments& moments, const StateSpaceModel& model, int k) {
  if (k < 1) throw Error("mrf_forecast: k must be >= 1");
  FilterMoments cur = moments;
  for (int s = 1; s <= k; ++s) cur = mrf_predict(model, cur, moments.t + s);
  return cur;
}

KalmanFilter::KalmanFilter(const StateSpaceModel& model, Index dense_limit) : model_(model) {
  model.validate();
  if (model.size() > dense_limit)
    throw DimensionError("dense Kalman filter refused: n = " + std::to_string(model.size()) + " exceeds " +
                         std::to_string(dense_limit));
  Q_ = model.innovation ? model.innovation->dense() : Matrix::Zero(model.size(), model.size());
}

DenseMoments KalmanFilter::initial() const { return {model_.mu0, model_.sigma0->dense(), 0}; }

DenseMoments KalmanFilter::predict(const DenseMoments& prev, int t) const {
  const SparseMatrix A = model_.A(t);
  DenseMoments out;
  out.t = t;
  out.mu = A * prev.mu;
  if (model_.offset) out.mu += model_.offset(t);
  const Matrix AS = A * prev.Sigma;
  out.Sigma = Matrix(AS * A.transpose()) + Q_;
  out.Sigma = 0.5 * (out.Sigma + out.Sigma.transpose());
  return out;
}

KalmanFilter::Step KalmanFilter::update(const DenseMoments& prior, const Observation& obs, const Vector& y) const {
  Step s;
  s.prior = prior;
  const Index nt = obs.size();
  require_dim(y.size() == nt, "kf update: y and H disagree in length");
  if (nt == 0) {
    s.posterior = prior;
    return s;
  }
  const Matrix SHt = prior.Sigma * obs.H.transpose();  // n x nt
  Matrix S = obs.H * SHt;
  S += Matrix(obs.R);
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("innovation covariance is not positive definite", -1);
  const Vector r = y - obs.H * prior.mu;
  const Vector Sr = llt.solve(r);
  const Matrix K = llt.solve(SHt.transpose()).transpose();  // Σ H' S^{-1}
  s.posterior.t = prior.t;
  s.posterior.mu = prior.mu + K * r;
  s.posterior.Sigma = prior.Sigma - K * SHt.transpose();
  s.posterior.Sigma = 0.5 * (s.posterior.Sigma + s.posterior.Sigma.transpose());
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  s.loglik = -0.5 * (logdet + r.dot(Sr) + static_cast<double>(nt) * kLog2Pi);
  return s;
}

KalmanFilter::Step KalmanFilter::step(const DenseMoments& prev, const Observation& obs, const Vector& y, int t) const {
  return update(predict(prev, t), obs, y);
}

DenseMoments KalmanFilter::forecast(const DenseMoments& moments, int k) const {
  if (k < 1) throw Error("forecast: k must be >= 1");
  DenseMoments cur = moments;
  for (int s = 1; s <= k; ++s) cur = predict(cur, moments.t + s);
  return cur;
}

}  // namespace mrf
