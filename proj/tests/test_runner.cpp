#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "annih/errors.hpp"
#include "annih/runner.hpp"

using namespace annih;
namespace fs = std::filesystem;

namespace {

std::string base_config() {
  return R"({
    "scenario": "unit",
    "reactions": [{"reactants": 2, "products": 0, "rate": 1.0}],
    "initial": {"kind": "deterministic", "n": 2},
    "times": [0.0, 0.5],
    "engines": ["master"]
  })";
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "annih_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parsing happy path") {
  const RunConfig cfg = load_config(base_config());
  CHECK(cfg.scenario == "unit");
  CHECK(cfg.reactions.channels.size() == 1);
  CHECK(cfg.initial.kind == InitialKind::deterministic);
  CHECK(cfg.times.size() == 2);
  CHECK(cfg.engines == std::vector<std::string>{"master"});
  CHECK(cfg.compare.rule == "kse");
}

TEST_CASE("config errors carry JSON pointers") {
  auto expect_pointer = [](const std::string& json, const std::string& pointer) {
    try {
      load_config(json);
      FAIL("expected ConfigError for ", pointer);
    } catch (const ConfigError& e) {
      CHECK(e.pointer == pointer);
    }
  };
  expect_pointer(R"({"reactions":[{"reactants":2,"products":0,"rate":1}],
                     "initial":{"kind":"deterministic","n":2},
                     "times":[0],"engines":["master"]})",
                 "/scenario");
  expect_pointer(R"({"scenario":"x","reactions":[{"reactants":2,"products":0,"rate":1}],
                     "initial":{"kind":"deterministic","n":2},
                     "times":[],"engines":["master"]})",
                 "/times");
  expect_pointer(R"({"scenario":"x","reactions":[{"reactants":2,"products":0,"rate":1}],
                     "initial":{"kind":"deterministic","n":2},
                     "times":[0.5,1.0],"engines":["master"]})",
                 "/times/0");
  expect_pointer(R"({"scenario":"x","reactions":[{"reactants":2,"products":0,"rate":1}],
                     "initial":{"kind":"deterministic","n":2},
                     "times":[0,1,1],"engines":["master"]})",
                 "/times/2");
  expect_pointer(R"({"scenario":"x","reactions":[{"reactants":2,"products":0,"rate":1}],
                     "initial":{"kind":"deterministic","n":2},
                     "times":[0,1],"engines":["warp"]})",
                 "/engines/0");
  expect_pointer(R"({"scenario":"x","reactions":[{"reactants":2,"products":0,"rate":-1}],
                     "initial":{"kind":"deterministic","n":2},
                     "times":[0,1],"engines":["master"]})",
                 "/reactions");
  expect_pointer(R"({"scenario":"x","reactions":[{"reactants":2,"products":0,"rate":1}],
                     "initial":{"kind":"gamma"},
                     "times":[0,1],"engines":["master"]})",
                 "/initial/kind");
  CHECK_THROWS_AS(load_config("{not json"), ConfigError);
}

TEST_CASE("schema prints as valid JSON with the engine roster") {
  const std::string schema = config_schema_json();
  CHECK(schema.find("\"required\"") != std::string::npos);
  CHECK(schema.find("sde_reciprocal") != std::string::npos);
  CHECK(schema.find("appendix_d") != std::string::npos);
}

TEST_CASE("series comparison rules and the boundary case") {
  EngineOutput a, b;
  Series sa;
  sa.times = {0.0, 1.0};
  sa.values = {1.0, 2.0};
  sa.se = {0.0, 0.0};
  a["M1"] = sa;
  Series sb = sa;
  sb.values = {1.0, 2.5};
  b["M1"] = sb;

  CompareRule abs_rule;
  abs_rule.rule = "abs";
  abs_rule.abs_tol = 0.5;  // offset equals the tolerance: documented as pass
  const CompareReport r1 = compare_series("a", a, "b", b, abs_rule);
  REQUIRE(r1.rows.size() == 2);
  CHECK(r1.rows[0].pass);
  CHECK(r1.rows[1].diff == 0.5);
  CHECK(r1.rows[1].pass);
  abs_rule.abs_tol = 0.499;
  CHECK_FALSE(compare_series("a", a, "b", b, abs_rule).all_pass());

  CompareRule rel_rule;
  rel_rule.rule = "rel";
  rel_rule.rel_tol = 0.2;  // 0.5 <= 0.2 * 2.5
  CHECK(compare_series("a", a, "b", b, rel_rule).all_pass());

  CompareRule kse;
  kse.rule = "kse";
  kse.k = 3.0;
  kse.abs_tol = 1.0;  // exact-pair fallback
  b["M1"].se = {0.0, 0.1};
  const CompareReport r2 = compare_series("a", a, "b", b, kse);
  CHECK(r2.rows[1].tol == doctest::Approx(0.3));
  CHECK_FALSE(r2.rows[1].pass);
  CHECK(r2.rows[0].pass);  // both exact at t = 0, abs fallback

  Series misaligned = sa;
  misaligned.times = {0.0, 2.0};
  b["M1"] = misaligned;
  CHECK_THROWS_AS(compare_series("a", a, "b", b, kse), AlignmentError);
}

TEST_CASE("identical series compare clean") {
  EngineOutput a;
  Series s;
  s.times = {0.0, 1.0};
  s.values = {0.3, 0.7};
  s.se = {0.0, 0.0};
  a["G@0"] = s;
  const CompareReport r = compare_series("x", a, "y", a, CompareRule{});
  CHECK(r.all_pass());
  for (const auto& row : r.rows) CHECK(row.diff == 0.0);
}

TEST_CASE("two-particle scenario: exact engines agree end to end") {
  RunConfig cfg = load_config_file(std::string(SCENARIO_DIR) + "/two_particle.json");
  const fs::path dir = fresh_dir("two_particle");
  cfg.output_dir = dir.string();
  const RunResult result = run(cfg);
  CHECK(result.all_pass());
  CHECK(fs::exists(dir / "master.csv"));
  CHECK(fs::exists(dir / "distributional.csv"));
  CHECK(fs::exists(dir / "compare_report.csv"));
  CHECK(fs::exists(dir / "compare_report.json"));
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(!result.report.rows.empty());
}

TEST_CASE("engines leave their plot-ready artifacts behind") {
  RunConfig cfg = load_config_file(std::string(SCENARIO_DIR) + "/two_particle.json");
  const fs::path dir = fresh_dir("artifacts");
  cfg.output_dir = dir.string();
  run(cfg);
  CHECK(read_file(dir / "master_distribution_1.csv").rfind("n,prob", 0) == 0);
  CHECK(read_file(dir / "moments_closed_table_1.csv").rfind("m,M_m,t", 0) == 0);
  CHECK(read_file(dir / "distributional_comb_1.csv").rfind("n,c_n", 0) == 0);
  CHECK(read_file(dir / "distributional_laurent_1.csv")
            .rfind("re_phi,im_phi,re_value,im_value,remainder_bound", 0) == 0);
  CHECK(read_file(dir / "genfunc_pde_grid_1.csv").rfind("x,G", 0) == 0);
}

TEST_CASE("moment-duality scenario emits combined-SE rows for every order") {
  RunConfig cfg = load_config_file(std::string(SCENARIO_DIR) + "/moment_duality.json");
  cfg.ssa_paths = 4000;
  cfg.sde_paths = 4000;
  cfg.sde_dump_ensembles = true;
  const fs::path dir = fresh_dir("duality_small");
  cfg.output_dir = dir.string();
  const RunResult result = run(cfg);
  CHECK(result.all_pass());
  CHECK(result.flagged_paths.at("sde_em") == 0);
  CHECK(read_file(dir / "sde_em_moments_1.csv").rfind("m,re,im,stderr", 0) == 0);
  CHECK(read_file(dir / "sde_em_ensemble_1.csv").rfind("path,t,z1,z2,flagged", 0) == 0);
  CHECK(read_file(dir / "ssa_distribution_1.csv").rfind("n,prob,stderr", 0) == 0);
  for (const std::string obs : {"M1", "M2", "M3"}) {
    bool found_kse_row = false;
    for (const auto& row : result.report.rows) {
      if (row.observable == obs && row.engine_a == "ssa" && row.engine_b == "sde_em" &&
          row.time > 0) {
        CHECK(row.tol > cfg.compare.abs_floor);  // combined-SE tolerance, not the abs fallback
        found_kse_row = true;
      }
    }
    CHECK(found_kse_row);
  }
}

TEST_CASE("runs are byte-reproducible") {
  RunConfig cfg = load_config_file(std::string(SCENARIO_DIR) + "/pure_death.json");
  cfg.ssa_paths = 20000;
  const fs::path d1 = fresh_dir("repro1");
  const fs::path d2 = fresh_dir("repro2");
  cfg.output_dir = d1.string();
  run(cfg);
  cfg.output_dir = d2.string();
  run(cfg);
  for (const char* name : {"master.csv", "ssa.csv", "genfunc_closed.csv",
                           "compare_report.csv", "compare_report.json"}) {
    CHECK(read_file(d1 / name) == read_file(d2 / name));
  }
}

TEST_CASE("pure-death scenario matches its closed form to 1e-8") {
  RunConfig cfg = load_config_file(std::string(SCENARIO_DIR) + "/pure_death.json");
  cfg.ssa_paths = 20000;
  cfg.engines = {"master", "genfunc_closed"};
  cfg.output_dir = fresh_dir("pure_death").string();
  const RunResult result = run(cfg);
  CHECK(result.all_pass());
  for (const auto& row : result.report.rows) {
    if (row.observable.rfind("G@", 0) == 0) CHECK(row.diff <= 1e-8);
  }
}

TEST_CASE("engine compatibility is validated as configuration") {
  RunConfig cfg = load_config(base_config());
  cfg.engines = {"sde_em"};
  CHECK_THROWS_AS(run(cfg), ConfigError);  // diffusion start needs poisson data
  cfg.engines = {"sqbessel"};
  CHECK_THROWS_AS(run(cfg), ConfigError);  // wrong reaction set
  cfg.engines = {"distributional"};
  cfg.initial.n0 = 3;
  CHECK_THROWS_AS(run(cfg), ConfigError);  // odd start has no comb form
}

TEST_CASE("mid-run failures surface as engine errors") {
  RunConfig cfg = load_config(R"({
    "scenario": "overflowing",
    "reactions": [{"reactants": 0, "products": 1, "rate": 1.0}],
    "initial": {"kind": "deterministic", "n": 0},
    "times": [0.0, 3.0],
    "engines": ["master"],
    "n_max": 6
  })");
  cfg.output_dir = fresh_dir("overflow").string();
  try {
    run(cfg);
    FAIL("expected EngineError");
  } catch (const EngineError& e) {
    CHECK(e.engine == "master");
  }
}

TEST_CASE("environment variable overrides the output directory") {
  RunConfig cfg = load_config(base_config());
  const fs::path dir = fresh_dir("env_override");
  setenv("ANNIH_OUTPUT_DIR", dir.c_str(), 1);
  const RunResult result = run(cfg);
  unsetenv("ANNIH_OUTPUT_DIR");
  CHECK(result.directory == dir);
  CHECK(fs::exists(dir / "master.csv"));
}
