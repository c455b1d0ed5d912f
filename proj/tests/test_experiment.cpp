#include "doctest.h"
#include "fixtures.hpp"

#include "mrf/experiment.hpp"

#include <omp.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mrf;

namespace {

const char* kSmall = R"({
  "name": "small",
  "model": {"type": "advection_diffusion_1d", "T": 4, "n": 80},
  "tree": {"levels": 3, "children": 3, "knots": 2},
  "enkf": {"ensemble_size": 8, "taper_nnz": 8},
  "reps": 3,
  "seed": 5
})";

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("scenario parsing is strict") {
  const auto c = parse_scenario(kSmall);
  CHECK(c.name == "small");
  CHECK(c.model.T == 4);
  CHECK(c.reps == 3);
  CHECK(c.methods.size() == 5);
  CHECK(c.tree.knots_at(2) == 2);
  CHECK_THROWS_AS(parse_scenario(R"({"model": {"type": "advection_diffusion_1d", "bogus": 1}, "tree": {}})"), Error);
  CHECK_THROWS_AS(parse_scenario(R"({"model": {"type": "x"}, "tree": {}})"), Error);
  CHECK_THROWS_AS(parse_scenario(R"({"tree": {}})"), Error);
  CHECK_THROWS_AS(parse_scenario(R"({"model": {"type": "scalar_1d"}, "tree": {}, "methods": ["nope"]})"), Error);
}

TEST_CASE("methods resolve to their trees") {
  const auto c = parse_scenario(kSmall);
  const auto model = replicate_model(c, 0);
  const auto ms = methods_from_config(c, model.grid);
  REQUIRE(ms.size() == 5);
  CHECK(ms[1].tree->max_support() == 8);
  CHECK(ms[2].tree->levels() == 1);
  CHECK(ms[2].tree->region(0).num_knots() == 8);
  CHECK(ms[3].kind == MethodKind::MRA);
  CHECK(ms[4].kind == MethodKind::EnKF);
}

TEST_CASE("replicate streams are independent and reproducible") {
  const auto c = parse_scenario(kSmall);
  CHECK(truth_seed(c, 0) != truth_seed(c, 1));
  CHECK(Matrix(replicate_model(c, 0).obs(1).H) == Matrix(replicate_model(c, 0).obs(1).H));
  CHECK(Matrix(replicate_model(c, 0).obs(1).H) != Matrix(replicate_model(c, 1).obs(1).H));
}

TEST_CASE("comparison runs are byte-identical across reruns and thread counts") {
  const auto c = parse_scenario(kSmall);
  const auto model = replicate_model(c, 0);
  const auto ms = methods_from_config(c, model.grid);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto a = run_compare(c, ms);
  omp_set_num_threads(3);
  const auto b = run_compare(c, ms);
  omp_set_num_threads(saved);
  CHECK(a.failures.empty());
  CHECK(a.rows.size() == 3u * 5u * 4u);
  const auto dir = std::filesystem::temp_directory_path() / "mrf_experiment_tests";
  std::filesystem::create_directories(dir);
  write_scores_csv((dir / "a.csv").string(), a.rows, false);
  write_scores_csv((dir / "b.csv").string(), b.rows, false);
  const auto sa = slurp((dir / "a.csv").string());
  CHECK(sa == slurp((dir / "b.csv").string()));
  CHECK(sa.rfind("scenario,method,rep,t,kl,rmspe_ratio,coverage_90,runtime_ms\n", 0) == 0);

  const auto sum = summarize(a.rows);
  const auto& kf = sum.at({"kf", 2});
  CHECK(kf.count == 3);
  CHECK(kf.kl == 0.0);
  CHECK(kf.rmspe_ratio == doctest::Approx(1.0));
  for (const auto& r : a.rows)
    if (r.method != "kf") CHECK(r.kl > 0.0);
}

TEST_CASE("a failing replicate is reported, not fatal") {
  auto c = parse_scenario(kSmall);
  c.reps = 1;
  const auto model = replicate_model(c, 0);
  auto ms = methods_from_config(c, model.grid);
  ms[1].tree = build_partition(fx::line_grid(79), c.tree);  // wrong size
  const auto res = run_compare(c, ms);
  CHECK(res.failures.size() == 1);
}
