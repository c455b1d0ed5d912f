#pragma once

#include "mrf/filter.hpp"
#include "mrf/kernels.hpp"
#include "mrf/rng.hpp"

#include <optional>

namespace mrf {

/// Compactly supported taper whose radius gives a target row nnz.
struct Taper {
  TaperFamily family = TaperFamily::Kanter;
  double radius = 0.0;
  Index row_nnz = 0;  ///< nnz of a row away from boundaries
  SparseMatrix matrix;
};

/// Symmetric distance tapers only realise certain counts; the nearest one is
/// used, ties resolved toward the smaller count.
Taper make_taper(const Matrix& grid, Metric metric, Index target_nnz, TaperFamily family = TaperFamily::Kanter);

struct Ensemble {
  Matrix members;  ///< n_G x N_e, user order
  int t = 0;

  Index size() const { return members.cols(); }
  Vector mean() const;
  Matrix sample_covariance() const;
};

/// Perturbed-observation EnKF with optional covariance taper.
class EnsembleKalmanFilter {
 public:
  EnsembleKalmanFilter(const StateSpaceModel& model, Index ensemble_size, std::optional<Taper> taper);

  Ensemble initial(Rng& rng) const;
  Ensemble predict(const Ensemble& ens, int t, Rng& rng) const;
  Ensemble update(const Ensemble& prior, const Observation& obs, const Vector& y, Rng& rng) const;
  Ensemble step(const Ensemble& prev, const Observation& obs, const Vector& y, int t, Rng& rng) const;
  /// taper ∘ sample covariance (or the raw sample covariance without a taper)
  SparseMatrix tapered_covariance(const Ensemble& ens) const;

  const std::optional<Taper>& taper() const { return taper_; }

 private:
  StateSpaceModel model_;
  Index ne_;
  std::optional<Taper> taper_;
  Matrix LQ_, L0_;
};

/// Low-rank filter tree: N global knots, every other point its own region.
TreePtr make_lrf_tree(const Matrix& grid, int knots);

/// MRA-style filter: the prior is propagated without ever seeing data and
/// each filtering distribution conditions on y_t alone.
class MraFilter {
 public:
  MraFilter(const StateSpaceModel& model, const TreePtr& tree);
  FilterMoments step(const Observation& obs, const Vector& y, int t);
  const FilterMoments& prior() const { return prior_; }

 private:
  StateSpaceModel model_;
  FilterMoments prior_;
};

}  // namespace mrf
