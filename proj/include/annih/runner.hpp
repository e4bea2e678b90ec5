#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "annih/reaction.hpp"

namespace annih {

enum class InitialKind { deterministic, poisson };

struct InitialSpec {
  InitialKind kind = InitialKind::deterministic;
  int n0 = 0;           // deterministic
  double mean = 1.0;    // poisson
  double tail_tol = 1e-12;
};

enum class ClosedForm { none, pure_death, triplet_equal, triplet_two_beta };

struct CompareRule {
  std::string rule = "kse";  // abs | rel | kse
  double k = 3.0;
  double abs_tol = 1e-8;
  double rel_tol = 1e-6;
  double abs_floor = 0.0;
};

struct RunConfig {
  std::string scenario;
  ReactionSpec reactions;
  InitialSpec initial;
  std::vector<double> times;  // strictly increasing, starting at 0
  std::uint64_t seed = 0;
  std::vector<std::string> engines;
  std::vector<int> moment_orders = {1, 2, 3};
  std::vector<double> gf_points = {-0.5, 0.0, 0.5};
  std::optional<int> n_max;

  double master_tol = 1e-10;
  std::int64_t ssa_paths = 100000;
  double sde_dt = 1e-3;
  std::int64_t sde_paths = 100000;
  double sde_blowup_threshold = 1e6;
  bool sde_dump_ensembles = false;
  int moments_m_max = 40;
  double moments_tol = 1e-10;
  int pde_nodes = 513;
  double pde_dt = 1e-3;
  bool pde_chebyshev = false;
  ClosedForm closed_form = ClosedForm::none;  // none: infer from the reactions
  CompareRule compare;
  std::string output_dir;  // empty: out/<scenario>
};

// Parses and validates; throws ConfigError with a JSON pointer on violation.
RunConfig load_config(const std::string& json_text);
RunConfig load_config_file(const std::string& path);

// The published config schema as a JSON document.
std::string config_schema_json();

// One observable series on the run's time grid; se == 0 marks exact values.
struct Series {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> se;
};

using EngineOutput = std::map<std::string, Series>;  // observable name -> series

struct CompareRow {
  std::string observable;
  double time = 0.0;
  std::string engine_a, engine_b;
  double value_a = 0.0, value_b = 0.0;
  double diff = 0.0;
  double tol = 0.0;
  bool pass = false;
};

struct CompareReport {
  std::vector<CompareRow> rows;
  bool all_pass() const;
};

// Elementwise comparison of two aligned series under a tolerance rule;
// throws AlignmentError when the grids differ.
CompareReport compare_series(const std::string& name_a, const EngineOutput& a,
                             const std::string& name_b, const EngineOutput& b,
                             const CompareRule& rule);

struct RunResult {
  std::filesystem::path directory;
  CompareReport report;
  std::map<std::string, std::int64_t> flagged_paths;  // per sde engine
  bool all_pass() const { return report.all_pass(); }
};

// Executes every requested engine, writes per-engine CSVs, manifest.json and
// the compare report (JSON + CSV) under the output directory. The
// ANNIH_OUTPUT_DIR environment variable overrides config.output_dir.
RunResult run(const RunConfig& config);

// Exit codes for the CLI: 0 pass, 1 comparison failure, 2 config error,
// 3 engine error.
inline constexpr int kExitPass = 0;
inline constexpr int kExitCompareFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitEngineError = 3;

}  // namespace annih
