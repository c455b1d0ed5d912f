// Experiment runner for the multi-resolution filter.
//
// Exit codes: 0 success, 1 usage or I/O error, 2 some replicates failed,
// 3 invariant breach (pattern, locality or positive-definiteness).

#include "mrf/baselines.hpp"
#include "mrf/experiment.hpp"
#include "mrf/filter.hpp"
#include "mrf/io.hpp"
#include "mrf/mrd.hpp"
#include "mrf/partition.hpp"
#include "mrf/reference.hpp"
#include "mrf/rng.hpp"
#include "mrf/ssm.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace mrf;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<int> reps;
  int threads = 0;
  int rep = 0;
  std::string tree;
  std::string partition_out;
  bool no_timing = false;
};

struct FilterOpts {
  std::string method = "mrf";
  std::optional<Index> ensemble_size;
  std::optional<Index> taper_nnz;
  bool factors = false;
  bool verify = false;
};

struct PatternOpts {
  int t = 1;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config,--model", c.config, "scenario JSON")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "override the root seed");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--reps", c.reps, "override the replicate count")->check(CLI::PositiveNumber);
  sub->add_option("--threads", c.threads, "OpenMP threads (0 keeps the runtime default)");
  sub->add_option("--rep", c.rep, "replicate to simulate or filter")->check(CLI::NonNegativeNumber);
  sub->add_option("--tree", c.tree, "partition tree JSON replacing the configured tree")->check(CLI::ExistingFile);
  sub->add_option("--partition-out", c.partition_out, "write the partition tree as JSON");
  sub->add_flag("--no-timing", c.no_timing, "write 0 for every timing so reruns are byte-identical");
}

ScenarioConfig scenario(const Common& c) {
  ScenarioConfig cfg = load_scenario(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.reps) cfg.reps = *c.reps;
  if (c.threads > 0) omp_set_num_threads(c.threads);
  ensure_directory(c.out);
  return cfg;
}

TreePtr scenario_tree(const Common& c, const ScenarioConfig& cfg, const Matrix& grid) {
  TreePtr tree = c.tree.empty() ? build_partition(grid, cfg.tree) : read_tree_json(c.tree);
  if (tree->size() != grid.rows()) throw DimensionError("tree size does not match the model grid");
  if (!c.partition_out.empty()) write_tree_json(c.partition_out, *tree);
  return tree;
}

std::string path(const Common& c, const std::string& file) { return c.out + "/" + file; }

/// (t, index, value) rows for one vector.
void append_series(std::ofstream& os, int t, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) os << t << ',' << i << ',' << format_double(v[i]) << '\n';
}

std::ofstream open_series(const std::string& file, const char* header) {
  std::ofstream os(file);
  if (!os) throw Error("cannot open " + file + " for writing");
  os << header << '\n';
  return os;
}

/// Observed values keyed by the grid index each row of H selects.
void append_observations(std::ofstream& os, int t, const Observation& obs, const Vector& y) {
  const SparseMatrix Ht = obs.H.transpose();
  for (Index r = 0; r < Ht.outerSize(); ++r) {
    Index col = -1;
    double w = 0.0;
    for (SparseMatrix::InnerIterator it(Ht, r); it; ++it)
      if (std::abs(it.value()) > w) {
        w = std::abs(it.value());
        col = it.row();
      }
    os << t << ',' << col << ',' << format_double(y[r]) << '\n';
  }
}

int cmd_simulate(const Common& c) {
  const ScenarioConfig cfg = scenario(c);
  std::ofstream xs = open_series(path(c, "truth.csv"), "t,index,value");
  std::ofstream ys = open_series(path(c, "observations.csv"), "t,index,value");
  const int first = c.reps ? 0 : c.rep;
  const int last = c.reps ? cfg.reps - 1 : c.rep;
  for (int rep = first; rep <= last; ++rep) {
    const StateSpaceModel model = replicate_model(cfg, rep);
    const Trajectory tr = simulate_truth(model, cfg.model.T, truth_seed(cfg, rep));
    if (first != last) {
      xs << "# rep " << rep << '\n';
      ys << "# rep " << rep << '\n';
    }
    for (int t = 0; t <= cfg.model.T; ++t) append_series(xs, t, tr.x[static_cast<size_t>(t)]);
    for (int t = 1; t <= cfg.model.T; ++t)
      append_observations(ys, t, tr.obs[static_cast<size_t>(t)], tr.y[static_cast<size_t>(t)]);
  }
  return 0;
}

/// Generic-sparse recomputation of the posterior factor; throws on fill outside pattern(B).
void verify_update(const FilterMoments& prior, const UpdateResult& up, const Observation& obs) {
  const PartitionTree& tree = prior.tree();
  const auto blocks = split_observations(tree, tree.cols_to_internal(obs.H), obs.R);
  const auto chol = reference::cholesky_and_invert(build_lambda(prior.B, blocks).to_sparse_lower());
  const MultiResFactor ref = reference::apply_inverse_transpose(prior.B, chol.Linv);
  for (size_t k = 0; k < tree.regions().size(); ++k) {
    const double diff =
        (ref.block(static_cast<int>(k)) - up.posterior.B.block(static_cast<int>(k))).cwiseAbs().maxCoeff();
    if (diff > 1e-8) throw PatternBreach("posterior factor disagrees with the generic sparse path");
  }
}

int cmd_filter(const Common& c, const FilterOpts& f) {
  ScenarioConfig cfg = scenario(c);
  const StateSpaceModel model = replicate_model(cfg, c.rep);
  cfg.methods = {f.method};
  if (f.ensemble_size) cfg.enkf.ensemble_size = *f.ensemble_size;
  if (f.taper_nnz) cfg.enkf.taper_nnz = *f.taper_nnz;
  MethodSpec spec = methods_from_config(cfg, model.grid).front();
  if (spec.kind == MethodKind::MRF || spec.kind == MethodKind::MRA) {
    if (f.method == "lrf") {
      if (!c.partition_out.empty()) write_tree_json(c.partition_out, *spec.tree);
    } else {
      spec.tree = scenario_tree(c, cfg, model.grid);
    }
  }
  const Trajectory tr = simulate_truth(model, cfg.model.T, truth_seed(cfg, c.rep));

  std::ofstream means = open_series(path(c, "mean.csv"), "t,index,value");
  std::ofstream vars = open_series(path(c, "variance.csv"), "t,index,value");
  std::ofstream timing = open_series(path(c, "timing.csv"), "t,phase,millis");
  if (f.factors) ensure_directory(path(c, "factors"));

  using clock = std::chrono::steady_clock;
  auto lap = [&](int t, const char* phase, clock::time_point t0) {
    const double ms = c.no_timing ? 0.0 : std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    timing << t << ',' << phase << ',' << format_double(ms) << '\n';
  };

  std::optional<KalmanFilter> kf;
  DenseMoments exact;
  FilterMoments fm;
  std::optional<MraFilter> mra;
  std::optional<EnsembleKalmanFilter> enkf;
  Ensemble ens;
  Rng rng = make_rng(cfg.seed, {static_cast<std::uint64_t>(c.rep), 2, 0});
  switch (spec.kind) {
    case MethodKind::KF:
      kf.emplace(model);
      exact = kf->initial();
      break;
    case MethodKind::MRF:
      fm = mrf_initialize(model, spec.tree);
      break;
    case MethodKind::MRA:
      mra.emplace(model, spec.tree);
      break;
    case MethodKind::EnKF: {
      std::optional<Taper> taper;
      if (spec.enkf.taper_nnz > 0)
        taper = make_taper(model.grid,
                           cfg.model.type == "advection_diffusion_1d" ? Metric::Circular : Metric::Euclidean,
                           spec.enkf.taper_nnz, spec.enkf.taper);
      enkf.emplace(model, spec.enkf.ensemble_size, taper);
      ens = enkf->initial(rng);
      break;
    }
  }

  for (int t = 1; t <= cfg.model.T; ++t) {
    const auto& obs = tr.obs[static_cast<size_t>(t)];
    const auto& y = tr.y[static_cast<size_t>(t)];
    Vector mu, var;
    auto t0 = clock::now();
    switch (spec.kind) {
      case MethodKind::KF: {
        const DenseMoments prior = kf->predict(exact, t);
        lap(t, "predict", t0);
        t0 = clock::now();
        exact = kf->update(prior, obs, y).posterior;
        lap(t, "update", t0);
        mu = exact.mu;
        var = exact.Sigma.diagonal();
        break;
      }
      case MethodKind::MRF: {
        const FilterMoments prior = mrf_predict(model, fm, t);
        lap(t, "predict", t0);
        t0 = clock::now();
        UpdateResult up = mrf_update(prior, obs, y);
        lap(t, "update", t0);
        if (f.verify) verify_update(prior, up, obs);
        fm = std::move(up.posterior);
        fm.t = t;
        if (f.factors)
          write_matrix_market(path(c, "factors/B_" + std::to_string(t) + ".mtx"), fm.B.to_sparse());
        mu = fm.mean();
        var = fm.variance();
        break;
      }
      case MethodKind::MRA: {
        const FilterMoments post = mra->step(obs, y, t);
        lap(t, "step", t0);
        mu = post.mean();
        var = post.variance();
        break;
      }
      case MethodKind::EnKF: {
        const Ensemble prior = enkf->predict(ens, t, rng);
        lap(t, "predict", t0);
        t0 = clock::now();
        ens = enkf->update(prior, obs, y, rng);
        lap(t, "update", t0);
        mu = ens.mean();
        var = Vector(enkf->tapered_covariance(ens).diagonal());
        break;
      }
    }
    append_series(means, t, mu);
    append_series(vars, t, var);
  }
  return 0;
}

int cmd_compare(const Common& c) {
  const ScenarioConfig cfg = scenario(c);
  const StateSpaceModel model = replicate_model(cfg, 0);
  std::vector<MethodSpec> methods = methods_from_config(cfg, model.grid);
  if (!c.tree.empty() || !c.partition_out.empty()) {
    const TreePtr tree = scenario_tree(c, cfg, model.grid);
    for (auto& m : methods)
      if ((m.kind == MethodKind::MRF && m.label != "lrf") || m.kind == MethodKind::MRA) m.tree = tree;
  }
  const CompareResult res = run_compare(cfg, methods);
  write_scores_csv(path(c, "scores.csv"), res.rows, !c.no_timing);

  std::ofstream os(path(c, "summary.csv"));
  if (!os) throw Error("cannot write summary.csv");
  os << "scenario,method,t,kl,rmspe_ratio,coverage_90,runtime_ms,reps\n";
  const auto sum = summarize(res.rows);
  for (const auto& m : methods)
    for (int t = 1; t <= cfg.model.T; ++t) {
      const auto it = sum.find({m.label, t});
      if (it == sum.end()) continue;
      const ScoreSummary& s = it->second;
      os << cfg.name << ',' << m.label << ',' << t << ',' << format_double(s.kl) << ','
         << format_double(s.rmspe_ratio) << ',' << format_double(s.coverage_90) << ','
         << format_double(c.no_timing ? 0.0 : s.runtime_ms) << ',' << s.count << '\n';
    }
  for (const auto& f : res.failures) std::cerr << "replicate failed: " << f << '\n';
  return res.failures.empty() ? 0 : 2;
}

int cmd_particle(const Common& c) {
  const ScenarioConfig cfg = scenario(c);
  const int first = c.reps ? 0 : c.rep;
  const int last = c.reps ? cfg.reps - 1 : c.rep;
  for (int rep = first; rep <= last; ++rep) {
    const ParticleRun run = run_particle(cfg, rep);
    const std::string suffix = first == last ? "" : "_rep" + std::to_string(rep);
    write_particle_csv(path(c, "particles" + suffix + ".csv"), run);
    std::ofstream ev = open_series(path(c, "evidence" + suffix + ".csv"), "t,log_evidence");
    for (size_t k = 0; k < run.log_evidence.size(); ++k) ev << k + 1 << ',' << format_double(run.log_evidence[k]) << '\n';
  }
  return 0;
}

/// Columns of the MRD of Σ0 on the grid, coarsest resolution first.
int cmd_export_basis(const Common& c) {
  const ScenarioConfig cfg = scenario(c);
  const StateSpaceModel model = replicate_model(cfg, c.rep);
  const TreePtr tree = scenario_tree(c, cfg, model.grid);
  const MultiResFactor B = mrd(*model.sigma0, tree);
  const Matrix D = tree->rows_to_original(B.to_dense());

  std::vector<Index> cols(static_cast<size_t>(D.cols()));
  for (Index k = 0; k < D.cols(); ++k) cols[static_cast<size_t>(k)] = k;
  std::stable_sort(cols.begin(), cols.end(), [&](Index a, Index b) {
    return tree->region(tree->col_region(a)).level < tree->region(tree->col_region(b)).level;
  });

  const Index d = model.grid.cols();
  std::vector<std::string> header;
  for (Index a = 0; a < d; ++a) header.push_back(d == 1 ? "x" : (a == 0 ? "x" : "y"));
  Matrix table(D.rows(), d + D.cols());
  table.leftCols(d) = model.grid;
  std::vector<int> seen(tree->regions().size(), 0);
  for (size_t j = 0; j < cols.size(); ++j) {
    const int r = tree->col_region(cols[j]);
    header.push_back("m" + std::to_string(tree->region(r).level) + "_r" + std::to_string(r) + "_k" +
                     std::to_string(seen[static_cast<size_t>(r)]++));
    table.col(d + static_cast<Index>(j)) = D.col(cols[j]);
  }
  write_csv(path(c, "basis.csv"), header, table);
  return 0;
}

/// Coordinates of B, B'B, L and L^{-1} at step t (internal order).
int cmd_export_pattern(const Common& c, const PatternOpts& p) {
  const ScenarioConfig cfg = scenario(c);
  const StateSpaceModel model = replicate_model(cfg, c.rep);
  const TreePtr tree = scenario_tree(c, cfg, model.grid);
  if (p.t < 1 || p.t > cfg.model.T) throw Error("--t must lie in 1..T");
  const Trajectory tr = simulate_truth(model, cfg.model.T, truth_seed(cfg, c.rep));
  FilterMoments cur = mrf_initialize(model, tree);
  for (int t = 1; t <= p.t; ++t) {
    StepResult s = mrf_step(model, cur, tr.obs[static_cast<size_t>(t)], tr.y[static_cast<size_t>(t)], t);
    if (t == p.t) {
      const SparseMatrix B = s.prior.B.to_sparse();
      SparseMatrix BtB = SparseMatrix(B.transpose()) * B;
      BtB.prune(0.0);
      const std::pair<const char*, SparseMatrix> mats[] = {
          {"B", B}, {"BtB", BtB}, {"L", s.update.L.to_sparse_lower()}, {"Linv", s.update.Linv.to_sparse_lower()}};
      for (const auto& [name, m] : mats) {
        write_pattern_csv(path(c, std::string("pattern_") + name + ".csv"), m);
        write_matrix_market(path(c, std::string(name) + ".mtx"), m);
      }
    }
    cur = std::move(s.update.posterior);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-resolution filter experiments"};
  app.require_subcommand(1);
  Common common;
  FilterOpts fopts;
  PatternOpts popts;

  auto* simulate = app.add_subcommand("simulate", "simulate truth and observations (t, index, value)");
  auto* filter = app.add_subcommand("filter", "run one filter and write per-step means and timings");
  auto* compare = app.add_subcommand("compare", "score every configured method against the Kalman filter");
  auto* particle = app.add_subcommand("particle", "particle filter over the configured parameters");
  auto* basis = app.add_subcommand("export-basis", "columns of B sampled on the grid");
  auto* pattern = app.add_subcommand("export-pattern", "nonzero coordinates of B, B'B, L and L^-1");
  for (auto* sub : {simulate, filter, compare, particle, basis, pattern}) add_common(sub, common);

  filter->add_option("--method", fopts.method, "kf, mrf, lrf, mra or enkf")
      ->check(CLI::IsMember({"kf", "mrf", "lrf", "mra", "enkf"}));
  filter->add_option("--ensemble-size", fopts.ensemble_size, "EnKF members")->check(CLI::PositiveNumber);
  filter->add_option("--taper-nnz", fopts.taper_nnz, "EnKF taper row count (0 disables)");
  filter->add_flag("--factors", fopts.factors, "write B_t|t per step as Matrix Market");
  filter->add_flag("--verify", fopts.verify, "recompute each update on the generic sparse path");
  pattern->add_option("--t", popts.t, "time step");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return cmd_simulate(common);
    if (*filter) return cmd_filter(common, fopts);
    if (*compare) return cmd_compare(common);
    if (*particle) return cmd_particle(common);
    if (*basis) return cmd_export_basis(common);
    if (*pattern) return cmd_export_pattern(common, popts);
  } catch (const PatternBreach& e) {
    std::cerr << "invariant breach: " << e.what() << '\n';
    return 3;
  } catch (const AssumptionViolation& e) {
    std::cerr << "invariant breach: " << e.what() << '\n';
    return 3;
  } catch (const NotPositiveDefinite& e) {
    std::cerr << "invariant breach: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
