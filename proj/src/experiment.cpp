#include "mrf/experiment.hpp"

#include "mrf/io.hpp"
#include "mrf/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>
#include <variant>

namespace mrf {

using json = nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error(where + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw Error(where + ": unknown key '" + key + "'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::vector<int> int_list(const json& j) {
  if (j.is_number_integer()) return {j.get<int>()};
  return j.get<std::vector<int>>();
}

ModelSpec parse_model(const json& j) {
  ModelSpec m;
  read(j, "type", m.type);
  read(j, "T", m.T);
  auto& p = m.params;
  if (m.type == "advection_diffusion_1d" || m.type == "advection_diffusion_2d") {
    const bool two_d = m.type == "advection_diffusion_2d";
    check_keys(j,
               two_d ? std::set<std::string>{"type", "T", "nx", "ny", "nu", "range", "sigma_w2", "sigma_v2",
                                             "obs_fraction", "diffusion", "advection", "advection_y"}
                     : std::set<std::string>{"type", "T", "n", "nu", "range", "sigma_w2", "sigma_v2", "obs_fraction",
                                             "diffusion", "advection"},
               "model");
    if (two_d) {
      p.diffusion = 0.2;
      p.advection = 0.1;
      p.advection_y = 0.1;
      p.kernel.range = 0.15;
      p.sigma_v2 = 0.25;
      p.obs_fraction = 0.1;
      p.nx = 34;
      p.ny = 34;
      read(j, "nx", p.nx);
      read(j, "ny", p.ny);
      read(j, "advection_y", p.advection_y);
    } else {
      read(j, "n", p.nx);
    }
    read(j, "nu", p.kernel.nu);
    read(j, "range", p.kernel.range);
    read(j, "sigma_w2", p.kernel.variance);
    read(j, "sigma_v2", p.sigma_v2);
    read(j, "obs_fraction", p.obs_fraction);
    read(j, "diffusion", p.diffusion);
    read(j, "advection", p.advection);
  } else if (m.type == "scalar_1d") {
    check_keys(j, {"type", "T", "n", "c", "nu", "range", "variance", "sigma_v2", "obs_fraction", "fast_path"}, "model");
    p.kernel = MaternKernel{0.5, 0.3, 1.0, Metric::Euclidean};
    read(j, "n", p.nx);
    read(j, "c", m.c);
    read(j, "nu", p.kernel.nu);
    read(j, "range", p.kernel.range);
    read(j, "variance", p.kernel.variance);
    read(j, "sigma_v2", p.sigma_v2);
    read(j, "obs_fraction", p.obs_fraction);
    read(j, "fast_path", m.fast_path);
  } else {
    throw Error("model: unknown type '" + m.type + "'");
  }
  p.kernel.validate();
  if (m.T < 1) throw Error("model: T must be >= 1");
  return m;
}

PartitionConfig parse_tree(const json& j) {
  check_keys(j, {"levels", "children", "knots", "placement", "singleton_finest"}, "tree");
  PartitionConfig c;
  read(j, "levels", c.levels);
  if (j.contains("children")) c.children = int_list(j["children"]);
  if (j.contains("knots")) c.knots = int_list(j["knots"]);
  std::string placement = "uniform";
  read(j, "placement", placement);
  if (placement == "uniform")
    c.placement = KnotPlacement::Uniform;
  else if (placement == "boundary")
    c.placement = KnotPlacement::Boundary;
  else
    throw Error("tree: placement must be 'uniform' or 'boundary'");
  read(j, "singleton_finest", c.singleton_finest);
  c.validate();
  return c;
}

TaperFamily parse_taper(const std::string& s) {
  if (s == "kanter") return TaperFamily::Kanter;
  if (s == "wendland") return TaperFamily::Wendland;
  throw Error("enkf: taper must be 'kanter' or 'wendland'");
}

ParticleSpec parse_particle(const json& j) {
  check_keys(j, {"n_particles", "params", "thetas", "proposal_sd", "resample_threshold"}, "particle");
  ParticleSpec s;
  read(j, "n_particles", s.n_particles);
  read(j, "proposal_sd", s.proposal_sd);
  read(j, "resample_threshold", s.resample_threshold);
  if (j.contains("params"))
    for (const auto& jp : j["params"]) {
      check_keys(jp, {"name", "prior", "a", "b", "walk_sd"}, "particle.params");
      ParameterSpec p;
      read(jp, "name", p.name);
      std::string prior = "uniform";
      read(jp, "prior", prior);
      if (prior == "uniform")
        p.prior = PriorKind::Uniform;
      else if (prior == "normal")
        p.prior = PriorKind::Normal;
      else if (prior == "lognormal")
        p.prior = PriorKind::LogNormal;
      else
        throw Error("particle.params: unknown prior '" + prior + "'");
      read(jp, "a", p.a);
      read(jp, "b", p.b);
      read(jp, "walk_sd", p.walk_sd);
      s.params.push_back(p);
    }
  if (j.contains("thetas"))
    for (const auto& jt : j["thetas"]) {
      const auto v = jt.get<std::vector<double>>();
      if (v.size() != s.params.size()) throw Error("particle.thetas: each entry needs one value per parameter");
      s.thetas.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
    }
  return s;
}

const std::set<std::string> kMethods{"kf", "mrf", "lrf", "mra", "enkf"};

}  // namespace

StateSpaceModel build_model(const ModelSpec& spec) {
  if (spec.type == "advection_diffusion_1d") return build_1d_advection_diffusion(spec.params);
  if (spec.type == "advection_diffusion_2d") return build_2d_advection_diffusion(spec.params);
  if (spec.type == "scalar_1d")
    return build_scalar_evolution(spec.params.nx, spec.c, spec.params.kernel, spec.params.sigma_v2,
                                  spec.params.obs_fraction, spec.params.obs_seed, spec.fast_path);
  throw Error("unknown model type '" + spec.type + "'");
}

ScenarioConfig parse_scenario(const std::string& text) {
  const json j = json::parse(text);
  check_keys(j, {"name", "model", "tree", "methods", "lrf", "enkf", "particle", "reps", "seed"}, "scenario");
  ScenarioConfig c;
  read(j, "name", c.name);
  if (!j.contains("model")) throw Error("scenario: 'model' is required");
  c.model = parse_model(j["model"]);
  if (!j.contains("tree")) throw Error("scenario: 'tree' is required");
  c.tree = parse_tree(j["tree"]);
  if (j.contains("methods")) {
    c.methods = j["methods"].get<std::vector<std::string>>();
    for (const auto& m : c.methods)
      if (!kMethods.count(m)) throw Error("scenario: unknown method '" + m + "'");
  }
  if (j.contains("lrf")) {
    check_keys(j["lrf"], {"knots"}, "lrf");
    read(j["lrf"], "knots", c.lrf_knots);
  }
  if (j.contains("enkf")) {
    const json& e = j["enkf"];
    check_keys(e, {"ensemble_size", "taper_nnz", "taper"}, "enkf");
    read(e, "ensemble_size", c.enkf.ensemble_size);
    read(e, "taper_nnz", c.enkf.taper_nnz);
    if (e.contains("taper")) c.enkf.taper = parse_taper(e["taper"].get<std::string>());
  }
  if (j.contains("particle")) c.particle = parse_particle(j["particle"]);
  read(j, "reps", c.reps);
  read(j, "seed", c.seed);
  if (c.reps < 1) throw Error("scenario: reps must be >= 1");
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_scenario(ss.str());
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

StateSpaceModel replicate_model(const ScenarioConfig& cfg, int rep) {
  ModelSpec spec = cfg.model;
  spec.params.obs_seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(rep), 1});
  return build_model(spec);
}

std::uint64_t truth_seed(const ScenarioConfig& cfg, int rep) {
  return derive_seed(cfg.seed, {static_cast<std::uint64_t>(rep), 0});
}

std::vector<MethodSpec> methods_from_config(const ScenarioConfig& cfg, const Matrix& grid) {
  std::vector<MethodSpec> out;
  TreePtr tree;
  auto main_tree = [&] {
    if (!tree) tree = build_partition(grid, cfg.tree);
    return tree;
  };
  for (const auto& m : cfg.methods) {
    MethodSpec s;
    s.label = m;
    if (m == "kf") {
      s.kind = MethodKind::KF;
    } else if (m == "mrf") {
      s.kind = MethodKind::MRF;
      s.tree = main_tree();
    } else if (m == "mra") {
      s.kind = MethodKind::MRA;
      s.tree = main_tree();
    } else if (m == "lrf") {
      s.kind = MethodKind::MRF;
      const int knots = cfg.lrf_knots > 0 ? cfg.lrf_knots : static_cast<int>(main_tree()->max_support());
      s.tree = make_lrf_tree(grid, knots);
    } else if (m == "enkf") {
      s.kind = MethodKind::EnKF;
      s.enkf = cfg.enkf;
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

struct EnkfState {
  EnsembleKalmanFilter filter;
  Ensemble ens;
};

using MethodState = std::variant<std::monostate, FilterMoments, MraFilter, EnkfState>;

}  // namespace

ReplicateResult run_replicate(const ScenarioConfig& cfg, const std::vector<MethodSpec>& methods, int rep) {
  ReplicateResult res;
  try {
    const StateSpaceModel model = replicate_model(cfg, rep);
    const int T = cfg.model.T;
    const Trajectory truth = simulate_truth(model, T, truth_seed(cfg, rep));
    const KalmanFilter kf(model);
    DenseMoments exact = kf.initial();

    std::vector<MethodState> state(methods.size());
    std::vector<Rng> rngs;
    for (size_t k = 0; k < methods.size(); ++k) {
      rngs.emplace_back(derive_seed(cfg.seed, {static_cast<std::uint64_t>(rep), 2, k}));
      const MethodSpec& m = methods[k];
      switch (m.kind) {
        case MethodKind::KF:
          break;
        case MethodKind::MRF:
          state[k] = mrf_initialize(model, m.tree);
          break;
        case MethodKind::MRA:
          state[k].emplace<MraFilter>(model, m.tree);
          break;
        case MethodKind::EnKF: {
          std::optional<Taper> taper;
          if (m.enkf.taper_nnz > 0)
            taper = make_taper(model.grid, model.grid.cols() == 1 && cfg.model.type == "advection_diffusion_1d"
                                               ? Metric::Circular
                                               : Metric::Euclidean,
                               m.enkf.taper_nnz, m.enkf.taper);
          EnsembleKalmanFilter f(model, m.enkf.ensemble_size, taper);
          Ensemble e = f.initial(rngs[k]);
          state[k] = EnkfState{std::move(f), std::move(e)};
          break;
        }
      }
    }

    using clock = std::chrono::steady_clock;
    for (int t = 1; t <= T; ++t) {
      const auto& obs = truth.obs[static_cast<size_t>(t)];
      const auto& y = truth.y[static_cast<size_t>(t)];
      const auto& x = truth.x[static_cast<size_t>(t)];
      const auto k0 = clock::now();
      exact = kf.step(exact, obs, y, t).posterior;
      const double kf_ms = std::chrono::duration<double, std::milli>(clock::now() - k0).count();
      const GaussianReference ref(exact.mu, exact.Sigma);

      for (size_t k = 0; k < methods.size(); ++k) {
        ScoreRow row;
        row.scenario = cfg.name;
        row.method = methods[k].label;
        row.rep = rep;
        row.t = t;
        Vector mu, var;
        Matrix cov;
        const auto s0 = clock::now();
        auto elapsed = [&] { return std::chrono::duration<double, std::milli>(clock::now() - s0).count(); };
        switch (methods[k].kind) {
          case MethodKind::KF:
            row.runtime_ms = kf_ms;
            mu = exact.mu;
            var = exact.Sigma.diagonal();
            break;
          case MethodKind::MRF: {
            auto& fm = std::get<FilterMoments>(state[k]);
            StepResult s = mrf_step(model, fm, obs, y, t);
            fm = std::move(s.update.posterior);
            fm.t = t;
            row.runtime_ms = elapsed();
            mu = fm.mean();
            var = fm.variance();
            cov = fm.covariance();
            break;
          }
          case MethodKind::MRA: {
            const FilterMoments post = std::get<MraFilter>(state[k]).step(obs, y, t);
            row.runtime_ms = elapsed();
            mu = post.mean();
            var = post.variance();
            cov = post.covariance();
            break;
          }
          case MethodKind::EnKF: {
            auto& es = std::get<EnkfState>(state[k]);
            es.ens = es.filter.step(es.ens, obs, y, t, rngs[k]);
            row.runtime_ms = elapsed();
            mu = es.ens.mean();
            cov = Matrix(es.filter.tapered_covariance(es.ens));
            var = cov.diagonal();
            break;
          }
        }
        row.kl = methods[k].kind == MethodKind::KF ? 0.0 : kl_gaussian(ref, mu, cov);
        row.rmspe_ratio = rmspe_ratio(x, mu, exact.mu);
        row.coverage_90 = coverage(mu, var, x, 0.9);
        res.rows.push_back(std::move(row));
      }
    }
  } catch (const std::exception& e) {
    res.error = "replicate " + std::to_string(rep) + ": " + e.what();
  }
  return res;
}

CompareResult run_compare(const ScenarioConfig& cfg, const std::vector<MethodSpec>& methods) {
  std::vector<ReplicateResult> reps(static_cast<size_t>(cfg.reps));
#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < cfg.reps; ++r) reps[static_cast<size_t>(r)] = run_replicate(cfg, methods, r);
  CompareResult out;
  std::map<std::string, size_t> order;
  for (size_t k = 0; k < methods.size(); ++k) order[methods[k].label] = k;
  for (auto& r : reps) {
    if (!r.error.empty()) out.failures.push_back(r.error);
    out.rows.insert(out.rows.end(), r.rows.begin(), r.rows.end());
  }
  std::stable_sort(out.rows.begin(), out.rows.end(), [&](const ScoreRow& a, const ScoreRow& b) {
    if (a.rep != b.rep) return a.rep < b.rep;
    if (order[a.method] != order[b.method]) return order[a.method] < order[b.method];
    return a.t < b.t;
  });
  return out;
}

std::map<std::pair<std::string, int>, ScoreSummary> summarize(const std::vector<ScoreRow>& rows) {
  std::map<std::pair<std::string, int>, ScoreSummary> out;
  for (const auto& r : rows) {
    auto& s = out[{r.method, r.t}];
    s.kl += r.kl;
    s.rmspe_ratio += r.rmspe_ratio;
    s.coverage_90 += r.coverage_90;
    s.runtime_ms += r.runtime_ms;
    ++s.count;
  }
  for (auto& [key, s] : out) {
    const double c = s.count;
    s.kl /= c;
    s.rmspe_ratio /= c;
    s.coverage_90 /= c;
    s.runtime_ms /= c;
  }
  return out;
}

void write_scores_csv(const std::string& path, const std::vector<ScoreRow>& rows, bool with_timing) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  os << "scenario,method,rep,t,kl,rmspe_ratio,coverage_90,runtime_ms\n";
  for (const auto& r : rows)
    os << r.scenario << ',' << r.method << ',' << r.rep << ',' << r.t << ',' << format_double(r.kl) << ','
       << format_double(r.rmspe_ratio) << ',' << format_double(r.coverage_90) << ','
       << format_double(with_timing ? r.runtime_ms : 0.0) << '\n';
}

ParticleFamily particle_family(const ScenarioConfig& cfg, int rep) {
  const bool scalar = cfg.model.type == "scalar_1d";
  const std::set<std::string> known = scalar ? std::set<std::string>{"c", "variance", "sigma_v2", "range"}
                                             : std::set<std::string>{"sigma_w2", "sigma_v2", "range", "diffusion",
                                                                     "advection"};
  if (cfg.particle.params.empty()) throw Error("particle: no parameters configured");
  for (const auto& p : cfg.particle.params)
    if (!known.count(p.name)) throw Error("particle: unknown parameter '" + p.name + "' for " + cfg.model.type);

  ModelSpec base = cfg.model;
  base.params.obs_seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(rep), 1});
  ParticleFamily f;
  f.params = cfg.particle.params;
  f.proposal_sd = cfg.particle.proposal_sd;
  f.model = [base, names = cfg.particle.params](const Vector& theta) {
    ModelSpec m = base;
    for (size_t k = 0; k < names.size(); ++k) {
      const double v = theta[static_cast<Index>(k)];
      const auto& n = names[k].name;
      if (n == "sigma_w2" || n == "variance")
        m.params.kernel.variance = v;
      else if (n == "sigma_v2")
        m.params.sigma_v2 = v;
      else if (n == "range")
        m.params.kernel.range = v;
      else if (n == "diffusion")
        m.params.diffusion = v;
      else if (n == "advection")
        m.params.advection = v;
      else if (n == "c")
        m.c = v;
    }
    return build_model(m);
  };
  return f;
}

ParticleRun run_particle(const ScenarioConfig& cfg, int rep) {
  const ParticleFamily family = particle_family(cfg, rep);
  const StateSpaceModel truth_model = replicate_model(cfg, rep);
  const Trajectory truth = simulate_truth(truth_model, cfg.model.T, truth_seed(cfg, rep));
  const TreePtr tree = build_partition(truth_model.grid, cfg.tree);
  Rng rng = make_rng(cfg.seed, {static_cast<std::uint64_t>(rep), 3});

  ParticleSet ps = cfg.particle.thetas.empty() ? pmrf_initialize(family, tree, cfg.particle.n_particles, rng)
                                               : pmrf_initialize(family, tree, cfg.particle.thetas);
  ParticleRun run;
  for (const auto& p : family.params) run.names.push_back(p.name);
  for (int t = 1; t <= cfg.model.T; ++t) {
    ParticleStep st = pmrf_step(ps, family, truth.obs[static_cast<size_t>(t)], truth.y[static_cast<size_t>(t)], t, rng);
    run.log_evidence.push_back(st.log_evidence);
    const Vector w = st.set.weights();
    const double ess = st.set.ess();
    bool fired = false;
    ps = resample(st.set, cfg.particle.resample_threshold, rng, &fired);
    for (Index i = 0; i < st.set.size(); ++i)
      run.rows.push_back(
          ParticleRow{t, i, st.set.particles[static_cast<size_t>(i)].theta, w[i], ess, fired});
  }
  return run;
}

void write_particle_csv(const std::string& path, const ParticleRun& run) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  os << "t,particle";
  for (const auto& n : run.names) os << ',' << n;
  os << ",weight,ess,resampled\n";
  for (const auto& r : run.rows) {
    os << r.t << ',' << r.particle;
    for (Index k = 0; k < r.theta.size(); ++k) os << ',' << format_double(r.theta[k]);
    os << ',' << format_double(r.weight) << ',' << format_double(r.ess) << ',' << (r.resampled ? 1 : 0) << '\n';
  }
}

}  // namespace mrf
