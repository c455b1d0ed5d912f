#pragma once

#include "mrf/filter.hpp"
#include "mrf/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mrf {

/// Integrated filtering log-likelihood log p(y_t | y_{1:t-1}, θ) from the
/// byproducts of an update, Gaussian constant included.
double integrated_loglik(const UpdateResult& update);

/// Same quantity recomputed from the prior, the posterior factor and y_t.
double integrated_loglik(const FilterMoments& prior, const UpdateResult& posterior, const Observation& obs,
                         const Vector& y);

enum class PriorKind { Uniform, Normal, LogNormal };

struct ParameterSpec {
  std::string name;
  PriorKind prior = PriorKind::Uniform;
  double a = 0.0;  ///< lower bound, mean, or log-mean
  double b = 1.0;  ///< upper bound, sd, or log-sd
  /// Random-walk transition sd (on the log scale for log-normal priors);
  /// 0 keeps the parameter static.
  double walk_sd = 0.0;
};

struct ParticleFamily {
  std::vector<ParameterSpec> params;
  std::function<StateSpaceModel(const Vector& theta)> model;
  /// Proposal random-walk sd; negative selects the bootstrap proposal q = p.
  double proposal_sd = -1.0;

  Vector sample_prior(Rng& rng) const;
  Vector sample_transition(const Vector& prev, Rng& rng) const;
  double log_transition(const Vector& next, const Vector& prev) const;
  Vector propose(const Vector& prev, Rng& rng) const;
  double log_proposal(const Vector& next, const Vector& prev) const;
};

struct Particle {
  Vector theta;
  double log_weight = 0.0;  ///< normalized
  FilterMoments moments;
};

struct ParticleSet {
  std::vector<Particle> particles;

  Index size() const { return static_cast<Index>(particles.size()); }
  Vector weights() const;
  double ess() const;
};

ParticleSet pmrf_initialize(const ParticleFamily& family, const TreePtr& tree, Index n_particles, Rng& rng);
/// Particles at fixed parameter values with equal weights.
ParticleSet pmrf_initialize(const ParticleFamily& family, const TreePtr& tree, const std::vector<Vector>& thetas);

struct ParticleStep {
  ParticleSet set;
  double log_evidence = 0.0;  ///< log Σ_i w_{t-1}^(i) L_t^(i)
};

ParticleStep pmrf_step(const ParticleSet& ps, const ParticleFamily& family, const Observation& obs, const Vector& y,
                       int t, Rng& rng);

/// Offspring indices for systematic resampling with offset u0 ∈ [0, 1/N).
std::vector<Index> systematic_indices(const Vector& weights, double u0);

/// Systematic resampling when ESS < threshold_frac · N_p.
ParticleSet resample(const ParticleSet& ps, double threshold_frac, Rng& rng, bool* fired = nullptr);

}  // namespace mrf
