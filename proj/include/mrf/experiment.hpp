#pragma once

#include "mrf/baselines.hpp"
#include "mrf/filter.hpp"
#include "mrf/particle.hpp"
#include "mrf/partition.hpp"
#include "mrf/ssm.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mrf {

struct ModelSpec {
  std::string type = "advection_diffusion_1d";  ///< or advection_diffusion_2d, scalar_1d
  AdvectionDiffusionParams params;
  int T = 20;
  double c = 1.0;          ///< scalar_1d only
  bool fast_path = false;  ///< scalar_1d only
};

StateSpaceModel build_model(const ModelSpec& spec);

struct EnkfSpec {
  Index ensemble_size = 8;
  Index taper_nnz = 8;  ///< 0 disables tapering
  TaperFamily taper = TaperFamily::Kanter;
};

struct ParticleSpec {
  Index n_particles = 2;
  std::vector<ParameterSpec> params;
  std::vector<Vector> thetas;  ///< fixed starting values; prior draws when empty
  double proposal_sd = -1.0;
  double resample_threshold = 0.5;
};

struct ScenarioConfig {
  std::string name = "scenario";
  ModelSpec model;
  PartitionConfig tree;
  int lrf_knots = -1;  ///< defaults to N of the tree
  std::vector<std::string> methods{"kf", "mrf", "lrf", "mra", "enkf"};
  EnkfSpec enkf;
  ParticleSpec particle;
  int reps = 10;
  std::uint64_t seed = 1;
};

/// Strict parse: unknown keys are rejected with the offending path.
ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::string& path);

/// Model with the observation stream of replicate rep.
StateSpaceModel replicate_model(const ScenarioConfig& cfg, int rep);
std::uint64_t truth_seed(const ScenarioConfig& cfg, int rep);

enum class MethodKind { KF, MRF, MRA, EnKF };

struct MethodSpec {
  std::string label;
  MethodKind kind = MethodKind::MRF;
  TreePtr tree;  ///< MRF and MRA
  EnkfSpec enkf;
};

/// kf, mrf, lrf, mra, enkf as configured.
std::vector<MethodSpec> methods_from_config(const ScenarioConfig& cfg, const Matrix& grid);

struct ScoreRow {
  std::string scenario;
  std::string method;
  int rep = 0;
  int t = 0;
  double kl = 0.0;
  double rmspe_ratio = 0.0;
  double coverage_90 = 0.0;
  double runtime_ms = 0.0;
};

struct ReplicateResult {
  std::vector<ScoreRow> rows;
  std::string error;  ///< empty on success
};

/// Simulates replicate rep once and scores every method against the dense
/// Kalman filter at each step.
ReplicateResult run_replicate(const ScenarioConfig& cfg, const std::vector<MethodSpec>& methods, int rep);

struct CompareResult {
  std::vector<ScoreRow> rows;
  std::vector<std::string> failures;
};

CompareResult run_compare(const ScenarioConfig& cfg, const std::vector<MethodSpec>& methods);

/// Means over replicates keyed by (method, t).
struct ScoreSummary {
  double kl = 0.0, rmspe_ratio = 0.0, coverage_90 = 0.0, runtime_ms = 0.0;
  int count = 0;
};
std::map<std::pair<std::string, int>, ScoreSummary> summarize(const std::vector<ScoreRow>& rows);

void write_scores_csv(const std::string& path, const std::vector<ScoreRow>& rows, bool with_timing = true);

/// Parameter family over the scenario model. Recognised names: sigma_w2,
/// sigma_v2, range, diffusion, advection (advection-diffusion models) and c,
/// variance, sigma_v2, range (scalar model). The observation pattern of
/// replicate rep is shared by every θ.
ParticleFamily particle_family(const ScenarioConfig& cfg, int rep);

struct ParticleRow {
  int t = 0;
  Index particle = 0;
  Vector theta;
  double weight = 0.0;
  double ess = 0.0;
  bool resampled = false;  ///< resampling fired after this step
};

struct ParticleRun {
  std::vector<std::string> names;
  std::vector<ParticleRow> rows;
  std::vector<double> log_evidence;  ///< per step, index t - 1
};

/// Particle filter on replicate rep's simulated data; the truth uses the
/// parameters of cfg.model.
ParticleRun run_particle(const ScenarioConfig& cfg, int rep);

void write_particle_csv(const std::string& path, const ParticleRun& run);

}  // namespace mrf
