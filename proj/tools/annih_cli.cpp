#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "annih/csv.hpp"
#include "annih/errors.hpp"
#include "annih/runner.hpp"

namespace {

// Long-format engine CSV (observable,time,value,stderr) back into series.
annih::EngineOutput read_engine_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw annih::ConfigError("cannot open '" + path + "'", "");
  annih::EngineOutput out;
  std::string line;
  if (!std::getline(in, line) || line.rfind("observable,time,value,stderr", 0) != 0)
    throw annih::ConfigError("'" + path + "' is not an engine CSV", "");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string obs, t, v, se;
    if (!std::getline(ss, obs, ',') || !std::getline(ss, t, ',') ||
        !std::getline(ss, v, ',') || !std::getline(ss, se, ','))
      throw annih::ConfigError("malformed row in '" + path + "': " + line, "");
    annih::Series& s = out[obs];
    s.times.push_back(std::stod(t));
    s.values.push_back(std::stod(v));
    s.se.push_back(std::stod(se));
  }
  return out;
}

std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"annih: cross-validation workbench for single-species reaction chains"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_override;
  auto* run_cmd = app.add_subcommand("run", "execute a scenario config and compare engines");
  run_cmd->add_option("config", config_path, "JSON run configuration")->required();
  run_cmd->add_option("--output-dir", output_override, "override the output directory");

  std::string csv_a, csv_b, rule = "abs";
  double k = 3.0, abs_tol = 1e-8, rel_tol = 1e-6;
  auto* cmp_cmd = app.add_subcommand("compare", "compare two engine CSV files");
  cmp_cmd->add_option("a", csv_a, "first engine CSV")->required();
  cmp_cmd->add_option("b", csv_b, "second engine CSV")->required();
  cmp_cmd->add_option("--rule", rule, "tolerance rule: abs | rel | kse")
      ->check(CLI::IsMember({"abs", "rel", "kse"}));
  cmp_cmd->add_option("--k", k, "SE multiplier for the kse rule");
  cmp_cmd->add_option("--abs", abs_tol, "absolute tolerance for the abs rule");
  cmp_cmd->add_option("--rel", rel_tol, "relative tolerance for the rel rule");

  auto* schema_cmd = app.add_subcommand("schema", "print the run-config JSON schema");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      annih::RunConfig cfg = annih::load_config_file(config_path);
      if (!output_override.empty()) cfg.output_dir = output_override;
      const annih::RunResult result = annih::run(cfg);
      std::int64_t failures = 0;
      for (const auto& row : result.report.rows)
        if (!row.pass) ++failures;
      std::cout << "wrote " << result.directory.string() << " (" << result.report.rows.size()
                << " comparisons, " << failures << " failures)\n";
      return result.all_pass() ? annih::kExitPass : annih::kExitCompareFailure;
    }
    if (cmp_cmd->parsed()) {
      const annih::EngineOutput a = read_engine_csv(csv_a);
      const annih::EngineOutput b = read_engine_csv(csv_b);
      annih::CompareRule crule;
      crule.rule = rule;
      crule.k = k;
      crule.abs_tol = abs_tol;
      crule.rel_tol = rel_tol;
      const annih::CompareReport report =
          annih::compare_series(stem_of(csv_a), a, stem_of(csv_b), b, crule);
      for (const auto& r : report.rows) {
        std::cout << (r.pass ? "pass" : "FAIL") << " " << r.observable << " t="
                  << annih::format_double(r.time) << " |" << annih::format_double(r.value_a)
                  << " - " << annih::format_double(r.value_b)
                  << "| = " << annih::format_double(r.diff)
                  << " tol=" << annih::format_double(r.tol) << "\n";
      }
      return report.all_pass() ? annih::kExitPass : annih::kExitCompareFailure;
    }
    if (schema_cmd->parsed()) {
      std::cout << annih::config_schema_json();
      return annih::kExitPass;
    }
  } catch (const annih::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return annih::kExitConfigError;
  } catch (const annih::AlignmentError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return annih::kExitConfigError;
  } catch (const annih::EngineError& e) {
    std::cerr << "engine error: " << e.what() << "\n";
    return annih::kExitEngineError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return annih::kExitEngineError;
  }
  return annih::kExitPass;
}
