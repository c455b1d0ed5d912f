#pragma once

#include "mrf/blocksparse.hpp"
#include "mrf/common.hpp"
#include "mrf/mrd.hpp"
#include "mrf/partition.hpp"
#include "mrf/ssm.hpp"

namespace mrf {

/// N(μ, BB') with μ stored in the tree's internal order.
struct FilterMoments {
  Vector mu;
  MultiResFactor B;
  int t = 0;

  const PartitionTree& tree() const { return B.tree(); }
  Vector mean() const;      ///< user order
  Vector variance() const;  ///< diag(BB') in user order, O(nN)
  Matrix covariance() const;
};

/// Dense moments in user order (exact filter).
struct DenseMoments {
  Vector mu;
  Matrix Sigma;
  int t = 0;
};

struct UpdateResult {
  FilterMoments posterior;
  Index n_obs = 0;
  double log_det_L = 0.0;
  double log_det_R = 0.0;
  double weighted_residual = 0.0;  ///< (y - Hμ)' R^{-1} (y - Hμ)
  Vector ytilde;                   ///< B_{t|t}' H' R^{-1} (y - Hμ)
  bool jittered = false;
  PanelMatrix L;                   ///< kept for pattern inspection
  PanelMatrix Linv;
};

struct StepResult {
  FilterMoments prior;
  UpdateResult update;
};

FilterMoments mrf_initialize(const StateSpaceModel& model, const TreePtr& tree);
/// One forecast step to time t.
FilterMoments mrf_predict(const StateSpaceModel& model, const FilterMoments& prev, int t);
/// Update of a prior with y_t; the prior's factor is not changed.
UpdateResult mrf_update(const FilterMoments& prior, const Observation& obs, const Vector& y);
StepResult mrf_step(const StateSpaceModel& model, const FilterMoments& prev, const Observation& obs,
                    const Vector& y, int t);
/// k forecast-only steps.
FilterMoments mrf_forecast(const FilterMoments& moments, const StateSpaceModel& model, int k);

/// Dense Kalman filter; caches Q densely.
class KalmanFilter {
 public:
  explicit KalmanFilter(const StateSpaceModel& model, Index dense_limit = 4000);

  struct Step {
    DenseMoments prior;
    DenseMoments posterior;
    double loglik = 0.0;  ///< log N(y; Hμ, HΣH' + R)
  };

  DenseMoments initial() const;
  DenseMoments predict(const DenseMoments& prev, int t) const;
  Step update(const DenseMoments& prior, const Observation& obs, const Vector& y) const;
  Step step(const DenseMoments& prev, const Observation& obs, const Vector& y, int t) const;
  DenseMoments forecast(const DenseMoments& moments, int k) const;

 private:
  StateSpaceModel model_;
  Matrix Q_;
};

}  // namespace mrf
