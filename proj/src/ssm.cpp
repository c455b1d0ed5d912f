#include "mrf/ssm.hpp"

#include "mrf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace mrf {

void StateSpaceModel::validate() const {
  const Index n = size();
  if (n < 1) throw DimensionError("model has an empty grid");
  if (!evolution || !observation) throw Error("model needs evolution and observation providers");
  require_dim(mu0.size() == n, "model: mu0 has the wrong length");
  if (!sigma0 || sigma0->size() != n) throw DimensionError("model: Sigma0 missing or of the wrong size");
  if (innovation && innovation->size() != n) throw DimensionError("model: Q has the wrong size");
  if (scalar_evolution && innovation) throw Error("model: scalar evolution is declared only for Q = 0");
}

Observation random_selection(Index n, double frac, double sigma_v2, std::uint64_t seed) {
  if (!(frac > 0.0 && frac <= 1.0)) throw Error("observation fraction must lie in (0, 1]");
  if (!(sigma_v2 > 0.0)) throw Error("observation noise variance must be positive");
  const auto nt = static_cast<Index>(std::llround(frac * static_cast<double>(n)));
  std::vector<Index> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  Rng rng(seed);
  // partial Fisher-Yates
  for (Index k = 0; k < nt; ++k) {
    std::uniform_int_distribution<Index> pick(k, n - 1);
    std::swap(idx[static_cast<size_t>(k)], idx[static_cast<size_t>(pick(rng))]);
  }
  idx.resize(static_cast<size_t>(nt));
  std::sort(idx.begin(), idx.end());
  Observation o;
  o.H.resize(nt, n);
  o.R.resize(nt, nt);
  std::vector<Triplet> h, r;
  for (Index k = 0; k < nt; ++k) {
    h.emplace_back(k, idx[static_cast<size_t>(k)], 1.0);
    r.emplace_back(k, k, sigma_v2);
  }
  o.H.setFromTriplets(h.begin(), h.end());
  o.R.setFromTriplets(r.begin(), r.end());
  return o;
}

namespace {

StateSpaceModel finish_model(Matrix grid, SparseMatrix A, const AdvectionDiffusionParams& p, std::string name) {
  StateSpaceModel m;
  m.name = std::move(name);
  const Index n = grid.rows();
  auto Ashared = std::make_shared<const SparseMatrix>(std::move(A));
  m.evolution = [Ashared](int) { return *Ashared; };
  auto q = std::make_shared<KernelCovariance>(grid, p.kernel);
  m.innovation = q;
  m.sigma0 = q;
  m.mu0 = Vector::Zero(n);
  const double frac = p.obs_fraction, sv = p.sigma_v2;
  const std::uint64_t seed = p.obs_seed;
  if (!(frac > 0.0 && frac <= 1.0)) throw Error("observation fraction must lie in (0, 1]");
  m.observation = [n, frac, sv, seed](int t) {
    return random_selection(n, frac, sv, derive_seed(seed, {static_cast<std::uint64_t>(t)}));
  };
  m.grid = std::move(grid);
  return m;
}

}  // namespace

StateSpaceModel build_1d_advection_diffusion(const AdvectionDiffusionParams& p) {
  const Index n = p.nx;
  if (n < 3) throw DimensionError("1D model needs at least 3 grid points");
  if (p.diffusion < 0.0 || p.diffusion > 0.5)
    throw Error("explicit scheme unstable: alpha*dt/ds^2 must lie in [0, 1/2]");
  Matrix grid(n, 1);
  for (Index i = 0; i < n; ++i) grid(i, 0) = static_cast<double>(i) / static_cast<double>(n);
  std::vector<Triplet> t;
  const double a = p.diffusion, b = p.advection;
  for (Index i = 0; i < n; ++i) {
    t.emplace_back(i, i, 1.0 - 2.0 * a);
    t.emplace_back(i, (i + 1) % n, a - 0.5 * b);
    t.emplace_back(i, (i + n - 1) % n, a + 0.5 * b);
  }
  SparseMatrix A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  A.prune(0.0);
  AdvectionDiffusionParams q = p;
  q.kernel.metric = Metric::Circular;
  StateSpaceModel m = finish_model(std::move(grid), std::move(A), q, "advection-diffusion-1d");
  m.evolution_row_budget = 3;
  return m;
}

StateSpaceModel build_2d_advection_diffusion(const AdvectionDiffusionParams& p) {
  const Index nx = p.nx, ny = p.ny, n = nx * ny;
  if (nx < 2 || ny < 2) throw DimensionError("2D model needs at least 2 points per axis");
  if (p.diffusion < 0.0 || p.diffusion > 0.25)
    throw Error("explicit scheme unstable: alpha*dt/ds^2 must lie in [0, 1/4] in two dimensions");
  Matrix grid(n, 2);
  for (Index iy = 0; iy < ny; ++iy)
    for (Index ix = 0; ix < nx; ++ix) {
      grid(iy * nx + ix, 0) = (static_cast<double>(ix) + 0.5) / static_cast<double>(nx);
      grid(iy * nx + ix, 1) = (static_cast<double>(iy) + 0.5) / static_cast<double>(ny);
    }
  const double a = p.diffusion, bx = p.advection, by = p.advection_y;
  std::vector<Triplet> t;
  for (Index iy = 0; iy < ny; ++iy)
    for (Index ix = 0; ix < nx; ++ix) {
      const Index i = iy * nx + ix;
      double diag = 1.0 - 4.0 * a;
      // weight of a neighbour outside the domain is reflected back onto the point itself
      auto link = [&](Index jx, Index jy, double w) {
        if (jx < 0 || jx >= nx || jy < 0 || jy >= ny)
          diag += w;
        else
          t.emplace_back(i, jy * nx + jx, w);
      };
      link(ix + 1, iy, a - 0.5 * bx);
      link(ix - 1, iy, a + 0.5 * bx);
      link(ix, iy + 1, a - 0.5 * by);
      link(ix, iy - 1, a + 0.5 * by);
      t.emplace_back(i, i, diag);
    }
  SparseMatrix A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  A.prune(0.0);
  AdvectionDiffusionParams q = p;
  q.kernel.metric = Metric::Euclidean;
  StateSpaceModel m = finish_model(std::move(grid), std::move(A), q, "advection-diffusion-2d");
  m.evolution_row_budget = 5;
  return m;
}

StateSpaceModel build_scalar_evolution(Index n, double c, const MaternKernel& sigma0, double sigma_v2,
                                       double obs_fraction, std::uint64_t obs_seed, bool fast_path) {
  if (n < 1) throw DimensionError("scalar model needs at least one point");
  Matrix grid(n, 1);
  for (Index i = 0; i < n; ++i) grid(i, 0) = static_cast<double>(i) / static_cast<double>(n);
  SparseMatrix A(n, n);
  A.setIdentity();
  A *= c;
  AdvectionDiffusionParams p;
  p.kernel = sigma0;
  p.kernel.metric = Metric::Euclidean;
  p.sigma_v2 = sigma_v2;
  p.obs_fraction = obs_fraction;
  p.obs_seed = obs_seed;
  StateSpaceModel m = finish_model(std::move(grid), std::move(A), p, "scalar-evolution");
  m.innovation = nullptr;
  m.evolution_row_budget = 1;
  if (fast_path) m.scalar_evolution = c;
  return m;
}

Matrix sampling_factor(const Matrix& cov, const std::string& what) {
  const Index n = cov.rows();
  const double scale = cov.diagonal().cwiseAbs().maxCoeff();
  if (n == 0 || scale == 0.0) return Matrix::Zero(n, n);
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.eigenvalues().minCoeff() < -1e-8 * scale) throw NotPositiveDefinite(what + " is not positive semidefinite", -1);
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Trajectory simulate_truth(const StateSpaceModel& model, int T, std::uint64_t seed) {
  model.validate();
  const Index n = model.size();
  Trajectory tr;
  const Matrix L0 = sampling_factor(model.sigma0->dense(), "Sigma0");
  const Matrix LQ = model.innovation ? sampling_factor(model.innovation->dense(), "Q") : Matrix();
  Rng rng0 = make_rng(seed, {0});
  tr.x.push_back(model.mu0 + L0 * standard_normal(n, rng0));
  tr.y.emplace_back();
  tr.obs.emplace_back();
  for (int t = 1; t <= T; ++t) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(t)});
    Vector x = model.A(t) * tr.x.back();
    if (model.offset) x += model.offset(t);
    const Vector zw = standard_normal(n, rng);
    if (model.innovation) x += LQ * zw;
    Observation o = model.obs(t);
    const Vector zv = standard_normal(o.size(), rng);
    Vector y = o.H * x;
    if (o.size() > 0) y += sampling_factor(Matrix(o.R), "R") * zv;
    tr.x.push_back(std::move(x));
    tr.y.push_back(std::move(y));
    tr.obs.push_back(std::move(o));
  }
  return tr;
}

LocalityReport check_observation_locality(const PartitionTree& tree, const Observation& obs) {
  LocalityReport rep;
  try {
    (void)split_observations(tree, tree.cols_to_internal(obs.H), obs.R);
  } catch (const AssumptionViolation& e) {
    rep.ok = false;
    rep.detail = e.what();
  }
  return rep;
}

LocalityReport check_evolution_locality(const PartitionTree& tree, const SparseMatrix& A, Index max_nnz,
                                        Index max_regions) {
  LocalityReport rep;
  const RowSparse Ar(tree.sym_to_internal(A));
  for (Index i = 0; i < Ar.rows(); ++i) {
    std::set<int> regions;
    Index nnz = 0;
    for (RowSparse::InnerIterator it(Ar, i); it; ++it) {
      if (it.value() == 0.0) continue;
      ++nnz;
      regions.insert(tree.row_region(it.col()));
    }
    rep.max_row_nnz = std::max(rep.max_row_nnz, nnz);
    rep.max_regions_touched = std::max(rep.max_regions_touched, static_cast<Index>(regions.size()));
    if (rep.ok && (nnz > max_nnz || static_cast<Index>(regions.size()) > max_regions)) {
      rep.ok = false;
      rep.detail = "evolution row " + std::to_string(tree.perm()[static_cast<size_t>(i)]) + " has " +
                   std::to_string(nnz) + " nonzeros over " + std::to_string(regions.size()) + " finest regions";
    }
  }
  return rep;
}

}  // namespace mrf
