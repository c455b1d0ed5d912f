#pragma once

#include "mrf/common.hpp"
#include "mrf/kernels.hpp"
#include "mrf/mrd.hpp"
#include "mrf/partition.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mrf {

/// H_t and R_t in user ordering.
struct Observation {
  SparseMatrix H;  ///< n_t x n_G
  SparseMatrix R;  ///< n_t x n_t
  Index size() const { return H.rows(); }
};

/// x_t = A_t x_{t-1} + w_t,  y_t = H_t x_t + v_t, everything in user ordering.
struct StateSpaceModel {
  std::string name;
  Matrix grid;  ///< n_G x d
  std::function<SparseMatrix(int t)> evolution;
  OraclePtr innovation;  ///< Q_t (time-invariant); null means Q = 0
  std::function<Observation(int t)> observation;
  Vector mu0;
  OraclePtr sigma0;
  /// Declared by the builder: A_t = c I and Q_t = 0 for every t.
  std::optional<double> scalar_evolution;
  /// Per-row nonzero budget for A_t; -1 disables the check.
  Index evolution_row_budget = -1;
  /// Optional additive mean offset applied in the forecast.
  std::function<Vector(int t)> offset;

  Index size() const { return grid.rows(); }
  SparseMatrix A(int t) const { return evolution(t); }
  Observation obs(int t) const { return observation(t); }
  void validate() const;
};

struct AdvectionDiffusionParams {
  Index nx = 80;           ///< grid points per axis (1D: n_G)
  Index ny = 1;            ///< 2D only
  double diffusion = 0.4;  ///< α Δt / Δs²
  double advection = 0.2;  ///< β Δt / Δs (both axes in 2D)
  double advection_y = 0.2;
  MaternKernel kernel{0.5, 0.1, 0.5, Metric::Circular};  ///< Q; variance is σ_w²
  double sigma_v2 = 0.05;
  double obs_fraction = 0.3;
  std::uint64_t obs_seed = 1;
};

/// Tridiagonal stencil with wraparound on a circle of unit circumference.
StateSpaceModel build_1d_advection_diffusion(const AdvectionDiffusionParams& p);
/// Five-point stencil on the unit square with reflecting boundaries.
StateSpaceModel build_2d_advection_diffusion(const AdvectionDiffusionParams& p);

/// A_t = c I with Q_t = 0 on points i / n of the unit interval (Euclidean
/// distance), Σ0 from the kernel. fast_path declares the scalar structure so
/// filters may skip the decomposition in the forecast.
StateSpaceModel build_scalar_evolution(Index n, double c, const MaternKernel& sigma0, double sigma_v2,
                                       double obs_fraction, std::uint64_t obs_seed, bool fast_path);

/// Selection operator for round(frac · n) distinct locations drawn from rng.
Observation random_selection(Index n, double frac, double sigma_v2, std::uint64_t seed);

struct Trajectory {
  std::vector<Vector> x;  ///< x_0 .. x_T
  std::vector<Vector> y;  ///< y_1 .. y_T at y[t]; y[0] unused
  std::vector<Observation> obs;
};

Trajectory simulate_truth(const StateSpaceModel& model, int T, std::uint64_t seed);

struct LocalityReport {
  bool ok = true;
  Index max_row_nnz = 0;
  Index max_regions_touched = 0;
  std::string detail;
};

/// Observation rows and noise entries confined to single finest regions.
LocalityReport check_observation_locality(const PartitionTree& tree, const Observation& obs);
/// Evolution rows with at most max_nnz entries touching at most max_regions finest regions.
LocalityReport check_evolution_locality(const PartitionTree& tree, const SparseMatrix& A, Index max_nnz,
                                        Index max_regions);

/// Lower Cholesky factor of a dense covariance, for sampling.
Matrix sampling_factor(const Matrix& cov, const std::string& what);

}  // namespace mrf
