#include "mrf/particle.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mrf {

namespace {

const double kLog2Pi = std::log(2.0 * M_PI);

double log_normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * kLog2Pi;
}

double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

double integrated_loglik(const UpdateResult& u) {
  if (u.n_obs == 0) return 0.0;
  return -0.5 * (2.0 * u.log_det_L + u.log_det_R + u.weighted_residual - u.ytilde.squaredNorm()) -
         0.5 * static_cast<double>(u.n_obs) * kLog2Pi;
}

double integrated_loglik(const FilterMoments& prior, const UpdateResult& posterior, const Observation& obs,
                         const Vector& y) {
  require_dim(y.size() == obs.size(), "integrated_loglik: y and H disagree in length");
  if (obs.size() == 0) return 0.0;
  const PartitionTree& tree = prior.tree();
  require_dim(&tree == &posterior.posterior.tree(), "integrated_loglik: prior and posterior on different trees");
  if (posterior.L.tree_ptr() == nullptr) throw Error("integrated_loglik: update byproducts missing");
  const ObservationBlocks blocks = split_observations(tree, tree.cols_to_internal(obs.H), obs.R);
  const Vector r = y - blocks.apply_H(prior.mu);
  const Vector ytilde = posterior.posterior.B.multiply_transpose(blocks.weighted_back_projection(r));
  return -0.5 * (2.0 * posterior.log_det_L + blocks.log_det_R + blocks.weighted_norm2(r) - ytilde.squaredNorm()) -
         0.5 * static_cast<double>(obs.size()) * kLog2Pi;
}

Vector ParticleFamily::sample_prior(Rng& rng) const {
  Vector th(static_cast<Index>(params.size()));
  for (size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    switch (p.prior) {
      case PriorKind::Uniform:
        th[static_cast<Index>(k)] = std::uniform_real_distribution<double>(p.a, p.b)(rng);
        break;
      case PriorKind::Normal:
        th[static_cast<Index>(k)] = std::normal_distribution<double>(p.a, p.b)(rng);
        break;
      case PriorKind::LogNormal:
        th[static_cast<Index>(k)] = std::exp(std::normal_distribution<double>(p.a, p.b)(rng));
        break;
    }
  }
  return th;
}

namespace {

Vector walk(const std::vector<ParameterSpec>& params, const Vector& prev, Rng& rng, double sd_override) {
  Vector next = prev;
  for (size_t k = 0; k < params.size(); ++k) {
    const double sd = sd_override >= 0.0 ? sd_override : params[k].walk_sd;
    if (sd == 0.0) continue;
    const double z = std::normal_distribution<double>(0.0, sd)(rng);
    const auto i = static_cast<Index>(k);
    next[i] = params[k].prior == PriorKind::LogNormal ? prev[i] * std::exp(z) : prev[i] + z;
  }
  return next;
}

double log_walk(const std::vector<ParameterSpec>& params, const Vector& next, const Vector& prev, double sd_override) {
  double s = 0.0;
  for (size_t k = 0; k < params.size(); ++k) {
    const double sd = sd_override >= 0.0 ? sd_override : params[k].walk_sd;
    const auto i = static_cast<Index>(k);
    if (sd == 0.0) {
      if (next[i] != prev[i]) return -std::numeric_limits<double>::infinity();
      continue;
    }
    if (params[k].prior == PriorKind::LogNormal) {
      if (next[i] <= 0.0) return -std::numeric_limits<double>::infinity();
      s += log_normal_pdf(std::log(next[i]), std::log(prev[i]), sd) - std::log(next[i]);
    } else {
      s += log_normal_pdf(next[i], prev[i], sd);
    }
  }
  return s;
}

}  // namespace

Vector ParticleFamily::sample_transition(const Vector& prev, Rng& rng) const { return walk(params, prev, rng, -1.0); }

double ParticleFamily::log_transition(const Vector& next, const Vector& prev) const {
  return log_walk(params, next, prev, -1.0);
}

Vector ParticleFamily::propose(const Vector& prev, Rng& rng) const {
  if (proposal_sd < 0.0) return sample_transition(prev, rng);
  return walk(params, prev, rng, proposal_sd);
}

double ParticleFamily::log_proposal(const Vector& next, const Vector& prev) const {
  if (proposal_sd < 0.0) return log_transition(next, prev);
  return log_walk(params, next, prev, proposal_sd);
}

Vector ParticleSet::weights() const {
  Vector w(size());
  for (Index i = 0; i < size(); ++i) w[i] = std::exp(particles[static_cast<size_t>(i)].log_weight);
  return w;
}

double ParticleSet::ess() const {
  const Vector w = weights();
  return 1.0 / w.squaredNorm();
}

ParticleSet pmrf_initialize(const ParticleFamily& family, const TreePtr& tree, const std::vector<Vector>& thetas) {
  if (thetas.empty()) throw Error("particle set needs at least one particle");
  if (family.proposal_sd >= 0.0)
    for (const auto& p : family.params)
      if (p.walk_sd == 0.0) throw Error("a random-walk proposal needs a random-walk transition for " + p.name);
  ParticleSet ps;
  ps.particles.resize(thetas.size());
  const double lw = -std::log(static_cast<double>(thetas.size()));
  for (size_t i = 0; i < thetas.size(); ++i) {
    ps.particles[i].theta = thetas[i];
    ps.particles[i].log_weight = lw;
    ps.particles[i].moments = mrf_initialize(family.model(thetas[i]), tree);
  }
  return ps;
}

ParticleSet pmrf_initialize(const ParticleFamily& family, const TreePtr& tree, Index n_particles, Rng& rng) {
  std::vector<Vector> thetas;
  for (Index i = 0; i < n_particles; ++i) thetas.push_back(family.sample_prior(rng));
  return pmrf_initialize(family, tree, thetas);
}

ParticleStep pmrf_step(const ParticleSet& ps, const ParticleFamily& family, const Observation& obs, const Vector& y,
                       int t, Rng& rng) {
  const auto np = static_cast<size_t>(ps.size());
  std::vector<Vector> thetas(np);
  for (size_t i = 0; i < np; ++i) thetas[i] = family.propose(ps.particles[i].theta, rng);

  ParticleStep out;
  out.set.particles.resize(np);
  std::vector<double> incr(np), loglik(np);
  detail::ParallelErrors errors;
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < static_cast<long>(np); ++k) errors.guard([&] {
    const auto i = static_cast<size_t>(k);
    const StateSpaceModel model = family.model(thetas[i]);
    StepResult s = mrf_step(model, ps.particles[i].moments, obs, y, t);
    loglik[i] = integrated_loglik(s.update);
    incr[i] = loglik[i] + family.log_transition(thetas[i], ps.particles[i].theta) -
              family.log_proposal(thetas[i], ps.particles[i].theta);
    out.set.particles[i].theta = thetas[i];
    out.set.particles[i].moments = std::move(s.update.posterior);
    out.set.particles[i].moments.t = t;
  });
  errors.rethrow();

  std::vector<double> lw(np);
  for (size_t i = 0; i < np; ++i) lw[i] = ps.particles[i].log_weight + incr[i];
  const double norm = log_sum_exp(lw);
  if (!std::isfinite(norm))
    throw Error("all particle weights underflowed at t = " + std::to_string(t) + "; review the proposal");
  for (size_t i = 0; i < np; ++i) out.set.particles[i].log_weight = lw[i] - norm;
  out.log_evidence = norm;
  return out;
}

std::vector<Index> systematic_indices(const Vector& weights, double u0) {
  const Index n = weights.size();
  std::vector<Index> idx;
  idx.reserve(static_cast<size_t>(n));
  const double total = weights.sum();
  double cum = weights[0] / total;
  Index j = 0;
  for (Index k = 0; k < n; ++k) {
    const double u = u0 + static_cast<double>(k) / static_cast<double>(n);
    while (cum < u && j < n - 1) cum += weights[++j] / total;
    idx.push_back(j);
  }
  return idx;
}

ParticleSet resample(const ParticleSet& ps, double threshold_frac, Rng& rng, bool* fired) {
  if (!(threshold_frac > 0.0 && threshold_frac <= 1.0)) throw Error("resample threshold must lie in (0, 1]");
  const double n = static_cast<double>(ps.size());
  if (fired) *fired = false;
  if (ps.ess() >= threshold_frac * n) return ps;
  if (fired) *fired = true;
  const double u0 = std::uniform_real_distribution<double>(0.0, 1.0 / n)(rng);
  const std::vector<Index> idx = systematic_indices(ps.weights(), u0);
  ParticleSet out;
  out.particles.reserve(idx.size());
  for (Index i : idx) {
    out.particles.push_back(ps.particles[static_cast<size_t>(i)]);
    out.particles.back().log_weight = -std::log(n);
  }
  return out;
}

}  // namespace mrf
