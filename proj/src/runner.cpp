#include "annih/runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "annih/csv.hpp"
#include "annih/distributional.hpp"
#include "annih/errors.hpp"
#include "annih/exports.hpp"
#include "annih/genfunc.hpp"
#include "annih/moments.hpp"
#include "annih/numeric.hpp"
#include "annih/rng.hpp"
#include "annih/sde.hpp"

namespace annih {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

const std::set<std::string>& known_engines() {
  static const std::set<std::string> e = {
      "master",     "ssa",        "moments_closed", "moments_truncated",
      "sde_em",     "sde_reciprocal", "sqbessel",   "appendix_d",
      "genfunc_closed", "genfunc_pde", "distributional"};
  return e;
}

[[noreturn]] void fail(const std::string& msg, const std::string& pointer) {
  throw ConfigError(msg, pointer);
}

const json& member(const json& j, const std::string& key, const std::string& pointer) {
  if (!j.contains(key)) fail("missing required field", pointer + "/" + key);
  return j.at(key);
}

double as_number(const json& j, const std::string& pointer) {
  if (!j.is_number()) fail("expected a number", pointer);
  return j.get<double>();
}

int as_int(const json& j, const std::string& pointer) {
  if (!j.is_number_integer()) fail("expected an integer", pointer);
  return j.get<int>();
}

std::string as_string(const json& j, const std::string& pointer) {
  if (!j.is_string()) fail("expected a string", pointer);
  return j.get<std::string>();
}

}  // namespace

RunConfig load_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what(), "");
  }
  if (!j.is_object()) fail("config must be a JSON object", "");

  RunConfig cfg;
  cfg.scenario = as_string(member(j, "scenario", ""), "/scenario");
  if (cfg.scenario.empty()) fail("scenario must be nonempty", "/scenario");

  const json& reactions = member(j, "reactions", "");
  if (!reactions.is_array() || reactions.empty())
    fail("reactions must be a nonempty array", "/reactions");
  for (std::size_t i = 0; i < reactions.size(); ++i) {
    const std::string ptr = "/reactions/" + std::to_string(i);
    const json& r = reactions[i];
    if (!r.is_object()) fail("expected an object", ptr);
    ReactionChannel c;
    c.reactants = as_int(member(r, "reactants", ptr), ptr + "/reactants");
    c.products = as_int(member(r, "products", ptr), ptr + "/products");
    c.rate = as_number(member(r, "rate", ptr), ptr + "/rate");
    cfg.reactions.channels.push_back(c);
  }
  try {
    validate(cfg.reactions);
  } catch (const std::invalid_argument& e) {
    fail(e.what(), "/reactions");
  }

  const json& init = member(j, "initial", "");
  if (!init.is_object()) fail("expected an object", "/initial");
  const std::string kind = as_string(member(init, "kind", "/initial"), "/initial/kind");
  if (kind == "deterministic") {
    cfg.initial.kind = InitialKind::deterministic;
    cfg.initial.n0 = as_int(member(init, "n", "/initial"), "/initial/n");
    if (cfg.initial.n0 < 0) fail("n must be >= 0", "/initial/n");
  } else if (kind == "poisson") {
    cfg.initial.kind = InitialKind::poisson;
    cfg.initial.mean = as_number(member(init, "mean", "/initial"), "/initial/mean");
    if (!(cfg.initial.mean > 0)) fail("mean must be positive", "/initial/mean");
  } else {
    fail("kind must be 'deterministic' or 'poisson'", "/initial/kind");
  }
  if (init.contains("tail_tol")) {
    cfg.initial.tail_tol = as_number(init["tail_tol"], "/initial/tail_tol");
    if (!(cfg.initial.tail_tol > 0)) fail("tail_tol must be positive", "/initial/tail_tol");
  }

  const json& times = member(j, "times", "");
  if (!times.is_array() || times.empty()) fail("times must be a nonempty array", "/times");
  for (std::size_t i = 0; i < times.size(); ++i)
    cfg.times.push_back(as_number(times[i], "/times/" + std::to_string(i)));
  if (cfg.times.front() != 0.0) fail("time grid must start at 0", "/times/0");
  for (std::size_t i = 1; i < cfg.times.size(); ++i)
    if (!(cfg.times[i] > cfg.times[i - 1]))
      fail("time grid must increase strictly", "/times/" + std::to_string(i));

  const json& engines = member(j, "engines", "");
  if (!engines.is_array() || engines.empty())
    fail("engines must be a nonempty array", "/engines");
  for (std::size_t i = 0; i < engines.size(); ++i) {
    const std::string name = as_string(engines[i], "/engines/" + std::to_string(i));
    if (!known_engines().count(name))
      fail("unknown engine '" + name + "'", "/engines/" + std::to_string(i));
    if (std::find(cfg.engines.begin(), cfg.engines.end(), name) != cfg.engines.end())
      fail("duplicate engine '" + name + "'", "/engines/" + std::to_string(i));
    cfg.engines.push_back(name);
  }

  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer()) fail("expected an integer", "/seed");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("moment_orders")) {
    cfg.moment_orders.clear();
    const json& mo = j["moment_orders"];
    if (!mo.is_array()) fail("expected an array", "/moment_orders");
    for (std::size_t i = 0; i < mo.size(); ++i) {
      const int m = as_int(mo[i], "/moment_orders/" + std::to_string(i));
      if (m < 1) fail("moment orders must be >= 1", "/moment_orders/" + std::to_string(i));
      cfg.moment_orders.push_back(m);
    }
  }
  if (j.contains("gf_points")) {
    cfg.gf_points.clear();
    const json& gp = j["gf_points"];
    if (!gp.is_array()) fail("expected an array", "/gf_points");
    for (std::size_t i = 0; i < gp.size(); ++i) {
      const double x = as_number(gp[i], "/gf_points/" + std::to_string(i));
      if (x < -1.0 || x > 1.0)
        fail("generating-function points must lie in [-1, 1]", "/gf_points/" + std::to_string(i));
      cfg.gf_points.push_back(x);
    }
  }
  if (j.contains("n_max")) {
    const int n = as_int(j["n_max"], "/n_max");
    if (n < 1) fail("n_max must be >= 1", "/n_max");
    cfg.n_max = n;
  }
  if (j.contains("master")) {
    const json& m = j["master"];
    if (m.contains("tol")) {
      cfg.master_tol = as_number(m["tol"], "/master/tol");
      if (!(cfg.master_tol > 0)) fail("tol must be positive", "/master/tol");
    }
  }
  if (j.contains("ssa")) {
    const json& s = j["ssa"];
    if (s.contains("paths")) {
      cfg.ssa_paths = as_int(s["paths"], "/ssa/paths");
      if (cfg.ssa_paths < 1) fail("paths must be >= 1", "/ssa/paths");
    }
  }
  if (j.contains("sde")) {
    const json& s = j["sde"];
    if (s.contains("dt")) cfg.sde_dt = as_number(s["dt"], "/sde/dt");
    if (!(cfg.sde_dt > 0)) fail("dt must be positive", "/sde/dt");
    if (s.contains("paths")) {
      cfg.sde_paths = as_int(s["paths"], "/sde/paths");
      if (cfg.sde_paths < 1) fail("paths must be >= 1", "/sde/paths");
    }
    if (s.contains("blowup_threshold")) {
      cfg.sde_blowup_threshold = as_number(s["blowup_threshold"], "/sde/blowup_threshold");
      if (cfg.sde_blowup_threshold < 1e3)
        fail("blowup_threshold must be >= 1e3", "/sde/blowup_threshold");
    }
    if (s.contains("dump_ensembles")) {
      if (!s["dump_ensembles"].is_boolean()) fail("expected a boolean", "/sde/dump_ensembles");
      cfg.sde_dump_ensembles = s["dump_ensembles"].get<bool>();
    }
  }
  if (j.contains("moments")) {
    const json& m = j["moments"];
    if (m.contains("m_max")) {
      cfg.moments_m_max = as_int(m["m_max"], "/moments/m_max");
      if (cfg.moments_m_max < 2) fail("m_max must be >= 2", "/moments/m_max");
    }
    if (m.contains("tol")) {
      cfg.moments_tol = as_number(m["tol"], "/moments/tol");
      if (!(cfg.moments_tol > 0)) fail("tol must be positive", "/moments/tol");
    }
  }
  if (j.contains("pde")) {
    const json& p = j["pde"];
    if (p.contains("nodes")) {
      cfg.pde_nodes = as_int(p["nodes"], "/pde/nodes");
      if (cfg.pde_nodes < 66) fail("nodes must be >= 66", "/pde/nodes");
    }
    if (p.contains("dt")) {
      cfg.pde_dt = as_number(p["dt"], "/pde/dt");
      if (!(cfg.pde_dt > 0)) fail("dt must be positive", "/pde/dt");
    }
    if (p.contains("chebyshev")) {
      if (!p["chebyshev"].is_boolean()) fail("expected a boolean", "/pde/chebyshev");
      cfg.pde_chebyshev = p["chebyshev"].get<bool>();
    }
  }
  if (j.contains("closed_form")) {
    const std::string f = as_string(j["closed_form"], "/closed_form");
    if (f == "pure_death")
      cfg.closed_form = ClosedForm::pure_death;
    else if (f == "triplet_equal")
      cfg.closed_form = ClosedForm::triplet_equal;
    else if (f == "triplet_two_beta")
      cfg.closed_form = ClosedForm::triplet_two_beta;
    else
      fail("unknown closed form '" + f + "'", "/closed_form");
  }
  if (j.contains("compare")) {
    const json& c = j["compare"];
    if (c.contains("rule")) {
      cfg.compare.rule = as_string(c["rule"], "/compare/rule");
      if (cfg.compare.rule != "abs" && cfg.compare.rule != "rel" && cfg.compare.rule != "kse")
        fail("rule must be abs, rel or kse", "/compare/rule");
    }
    if (c.contains("k")) cfg.compare.k = as_number(c["k"], "/compare/k");
    if (c.contains("abs")) cfg.compare.abs_tol = as_number(c["abs"], "/compare/abs");
    if (c.contains("rel")) cfg.compare.rel_tol = as_number(c["rel"], "/compare/rel");
    if (c.contains("abs_floor"))
      cfg.compare.abs_floor = as_number(c["abs_floor"], "/compare/abs_floor");
  }
  if (j.contains("output_dir")) cfg.output_dir = as_string(j["output_dir"], "/output_dir");
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'", "");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config(ss.str());
}

std::string config_schema_json() {
  json schema = {
      {"$schema", "https://json-schema.org/draft/2020-12/schema"},
      {"title", "annih run configuration"},
      {"type", "object"},
      {"required", {"scenario", "reactions", "initial", "times", "engines"}},
      {"properties",
       {{"scenario", {{"type", "string"}, {"minLength", 1}}},
        {"reactions",
         {{"type", "array"},
          {"minItems", 1},
          {"items",
           {{"type", "object"},
            {"required", {"reactants", "products", "rate"}},
            {"properties",
             {{"reactants", {{"type", "integer"}, {"minimum", 0}}},
              {"products", {{"type", "integer"}, {"minimum", 0}}},
              {"rate", {{"type", "number"}, {"exclusiveMinimum", 0}}}}}}}}},
        {"initial",
         {{"type", "object"},
          {"required", {"kind"}},
          {"properties",
           {{"kind", {{"enum", {"deterministic", "poisson"}}}},
            {"n", {{"type", "integer"}, {"minimum", 0}}},
            {"mean", {{"type", "number"}, {"exclusiveMinimum", 0}}},
            {"tail_tol", {{"type", "number"}, {"exclusiveMinimum", 0}}}}}}},
        {"times",
         {{"type", "array"},
          {"minItems", 1},
          {"items", {{"type", "number"}}},
          {"description", "strictly increasing, first entry 0"}}},
        {"seed", {{"type", "integer"}}},
        {"engines",
         {{"type", "array"},
          {"minItems", 1},
          {"items",
           {{"enum",
             {"master", "ssa", "moments_closed", "moments_truncated", "sde_em",
              "sde_reciprocal", "sqbessel", "appendix_d", "genfunc_closed", "genfunc_pde",
              "distributional"}}}}}},
        {"moment_orders", {{"type", "array"}, {"items", {{"type", "integer"}, {"minimum", 1}}}}},
        {"gf_points",
         {{"type", "array"}, {"items", {{"type", "number"}, {"minimum", -1}, {"maximum", 1}}}}},
        {"n_max", {{"type", "integer"}, {"minimum", 1}}},
        {"master", {{"type", "object"}, {"properties", {{"tol", {{"type", "number"}}}}}}},
        {"ssa", {{"type", "object"}, {"properties", {{"paths", {{"type", "integer"}}}}}}},
        {"sde",
         {{"type", "object"},
          {"properties",
           {{"dt", {{"type", "number"}}},
            {"paths", {{"type", "integer"}}},
            {"blowup_threshold", {{"type", "number"}, {"minimum", 1e3}}},
            {"dump_ensembles", {{"type", "boolean"}}}}}}},
        {"moments",
         {{"type", "object"},
          {"properties",
           {{"m_max", {{"type", "integer"}, {"minimum", 2}}}, {"tol", {{"type", "number"}}}}}}},
        {"pde",
         {{"type", "object"},
          {"properties",
           {{"nodes", {{"type", "integer"}, {"minimum", 66}}},
            {"dt", {{"type", "number"}}},
            {"chebyshev", {{"type", "boolean"}}}}}}},
        {"closed_form", {{"enum", {"pure_death", "triplet_equal", "triplet_two_beta"}}}},
        {"compare",
         {{"type", "object"},
          {"properties",
           {{"rule", {{"enum", {"abs", "rel", "kse"}}}},
            {"k", {{"type", "number"}}},
            {"abs", {{"type", "number"}}},
            {"rel", {{"type", "number"}}},
            {"abs_floor", {{"type", "number"}}}}}}},
        {"output_dir", {{"type", "string"}}}}}};
  return schema.dump(2) + "\n";
}

bool CompareReport::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const CompareRow& r) { return r.pass; });
}

CompareReport compare_series(const std::string& name_a, const EngineOutput& a,
                             const std::string& name_b, const EngineOutput& b,
                             const CompareRule& rule) {
  CompareReport report;
  for (const auto& [obs, sa] : a) {
    const auto it = b.find(obs);
    if (it == b.end()) continue;
    const Series& sb = it->second;
    if (sa.times.size() != sb.times.size())
      throw AlignmentError("compare: series '" + obs + "' have different grid sizes");
    for (std::size_t i = 0; i < sa.times.size(); ++i) {
      if (sa.times[i] != sb.times[i])
        throw AlignmentError("compare: series '" + obs + "' grids disagree at index " +
                             std::to_string(i));
      CompareRow row;
      row.observable = obs;
      row.time = sa.times[i];
      row.engine_a = name_a;
      row.engine_b = name_b;
      row.value_a = sa.values[i];
      row.value_b = sb.values[i];
      row.diff = std::abs(row.value_a - row.value_b);
      if (rule.rule == "abs") {
        row.tol = rule.abs_tol;
      } else if (rule.rule == "rel") {
        row.tol = rule.rel_tol * std::max(std::abs(row.value_a), std::abs(row.value_b));
      } else {  // kse, falling back to abs when both sides are exact
        const double se = sa.se[i] + sb.se[i];
        row.tol = se > 0 ? rule.k * se + rule.abs_floor : rule.abs_tol;
      }
      row.pass = row.diff <= row.tol;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

namespace {

ClosedForm infer_closed_form(const ReactionSpec& spec) {
  if (spec.channels.size() == 1 && spec.channels[0].reactants == 1 &&
      spec.channels[0].products == 0)
    return ClosedForm::pure_death;
  if (spec.channels.size() == 3) {
    double death = -1, birth = -1, branch = -1;
    for (const auto& c : spec.channels) {
      if (c.reactants == 1 && c.products == 0) death = c.rate;
      if (c.reactants == 0 && c.products == 1) birth = c.rate;
      if (c.reactants == 1 && c.products == 2) branch = c.rate;
    }
    if (death > 0 && birth > 0 && branch > 0) {
      if (death == birth && birth == branch) return ClosedForm::triplet_equal;
      if (death == branch && death == 2 * birth) return ClosedForm::triplet_two_beta;
    }
  }
  return ClosedForm::none;
}

bool is_pure_annihilation(const ReactionSpec& spec) {
  return spec.channels.size() == 1 && spec.channels[0].reactants == 2 &&
         spec.channels[0].products == 0;
}

struct RunContext {
  explicit RunContext(const RunConfig& c) : cfg(c) {}
  const RunConfig& cfg;
  int n_max = 0;
  CountDistribution init;
  Polynomial g0;
  ClosedForm form = ClosedForm::none;
  double t_max = 0.0;
};

// Smallest N whose Poisson(mu) tail beyond N stays below tol.
int poisson_support(double mu, double tol) {
  double term = std::exp(-mu);
  double cdf = term;
  int n = 0;
  while (1.0 - cdf > tol && n < 100000) {
    ++n;
    term *= mu / n;
    cdf += term;
  }
  return n;
}

RunContext make_context(const RunConfig& cfg) {
  RunContext ctx(cfg);
  ctx.t_max = cfg.times.back();
  ctx.form = cfg.closed_form != ClosedForm::none ? cfg.closed_form
                                                 : infer_closed_form(cfg.reactions);
  const double init_mean =
      cfg.initial.kind == InitialKind::deterministic ? cfg.initial.n0 : cfg.initial.mean;
  const int init_support = cfg.initial.kind == InitialKind::deterministic
                               ? cfg.initial.n0
                               : poisson_support(cfg.initial.mean, cfg.initial.tail_tol);
  ctx.n_max = cfg.n_max ? *cfg.n_max
                        : default_n_max(cfg.reactions, init_mean, init_support, ctx.t_max,
                                        cfg.initial.tail_tol);
  // Point masses carry no truncated tail, but on growth specs the declared
  // tolerance still polices the overflow counter during evolution.
  const double point_tail = no_growth(cfg.reactions) ? 1.0 : cfg.initial.tail_tol;
  ctx.init = cfg.initial.kind == InitialKind::deterministic
                 ? deterministic_initial(cfg.initial.n0, ctx.n_max, point_tail)
                 : truncated_poisson_initial(cfg.initial.mean, ctx.n_max, cfg.initial.tail_tol);
  ctx.g0 = gf_from_distribution(ctx.init);
  ctx.g0.trim();
  return ctx;
}

std::string gf_name(double x) { return "G@" + format_double(x); }

Series blank_series(const std::vector<double>& times) {
  Series s;
  s.times = times;
  s.values.assign(times.size(), 0.0);
  s.se.assign(times.size(), 0.0);
  return s;
}

void emit_distribution_observables(const RunContext& ctx, const CountDistribution& dist,
                                   std::size_t ti, EngineOutput& out) {
  const int m_top = *std::max_element(ctx.cfg.moment_orders.begin(), ctx.cfg.moment_orders.end());
  const FactorialMoments fm = factorial_moments(dist, m_top);
  for (const int m : ctx.cfg.moment_orders) {
    Series& s = out["M" + std::to_string(m)];
    s.values[ti] = fm.values[m];
    s.se[ti] = factorial_moment_se(dist, m);
  }
  const Polynomial g = gf_from_distribution(dist);
  for (const double x : ctx.cfg.gf_points) {
    Series& s = out[gf_name(x)];
    s.values[ti] = g(x);
    if (dist.n_samples > 0) {
      double second = 0.0;
      for (int n = 0; n < dist.probs.size(); ++n)
        second += dist.probs[n] * std::pow(x, 2 * n);
      const double var = std::max(0.0, second - s.values[ti] * s.values[ti]);
      s.se[ti] = std::sqrt(var / static_cast<double>(dist.n_samples));
    }
  }
}

EngineOutput prepare_output(const RunContext& ctx, bool with_imag = false) {
  EngineOutput out;
  for (const int m : ctx.cfg.moment_orders) {
    out["M" + std::to_string(m)] = blank_series(ctx.cfg.times);
    if (with_imag) out["M" + std::to_string(m) + "_im"] = blank_series(ctx.cfg.times);
  }
  for (const double x : ctx.cfg.gf_points) out[gf_name(x)] = blank_series(ctx.cfg.times);
  return out;
}

double annihilation_rate(const RunContext& ctx, const std::string& engine) {
  if (!is_pure_annihilation(ctx.cfg.reactions))
    throw ConfigError("engine '" + engine + "' requires the single pair-annihilation channel",
                      "/engines");
  return ctx.cfg.reactions.channels[0].rate;
}

double poisson_start(const RunContext& ctx, const std::string& engine) {
  if (ctx.cfg.initial.kind != InitialKind::poisson)
    throw ConfigError("engine '" + engine +
                          "' pairs a deterministic diffusion start with Poissonian chain data; "
                          "set initial.kind = poisson",
                      "/initial/kind");
  return ctx.cfg.initial.mean;
}

EngineOutput run_master(const RunContext& ctx, const std::filesystem::path& dir) {
  EngineOutput out = prepare_output(ctx);
  const RateGenerator gen = build_generator(ctx.cfg.reactions, ctx.n_max);
  CountDistribution dist = ctx.init;
  for (std::size_t ti = 0; ti < ctx.cfg.times.size(); ++ti) {
    if (ti > 0)
      dist = master_evolve(gen, dist, ctx.cfg.times[ti] - ctx.cfg.times[ti - 1],
                           ctx.cfg.master_tol);
    emit_distribution_observables(ctx, dist, ti, out);
    write_distribution_csv(dist,
                           (dir / ("master_distribution_" + std::to_string(ti) + ".csv")).string());
  }
  return out;
}

EngineOutput run_ssa(const RunContext& ctx, const std::filesystem::path& dir) {
  EngineOutput out = prepare_output(ctx);
  for (std::size_t ti = 0; ti < ctx.cfg.times.size(); ++ti) {
    const std::uint64_t seed_t = splitmix64(ctx.cfg.seed + 0x51a1ull * ti);
    const CountDistribution dist = ssa_ensemble(ctx.cfg.reactions, ctx.init,
                                                ctx.cfg.times[ti], ctx.cfg.ssa_paths, seed_t);
    emit_distribution_observables(ctx, dist, ti, out);
    write_distribution_csv(dist,
                           (dir / ("ssa_distribution_" + std::to_string(ti) + ".csv")).string());
  }
  return out;
}

EngineOutput run_moments_closed(const RunContext& ctx, const std::filesystem::path& dir) {
  const double lambda = annihilation_rate(ctx, "moments_closed");
  if (ctx.cfg.initial.kind != InitialKind::deterministic)
    throw ConfigError("engine 'moments_closed' needs compactly supported initial data",
                      "/initial/kind");
  EngineOutput out = prepare_output(ctx);
  const int n0 = ctx.cfg.initial.n0;
  const int m_top = std::max(
      n0, *std::max_element(ctx.cfg.moment_orders.begin(), ctx.cfg.moment_orders.end()));
  const FactorialMoments m0 = point_mass_moments(n0, m_top, lambda);
  for (std::size_t ti = 0; ti < ctx.cfg.times.size(); ++ti) {
    const FactorialMoments mt = solve_closed(m0, ctx.cfg.times[ti]);
    for (const int m : ctx.cfg.moment_orders) out["M" + std::to_string(m)].values[ti] = mt.values[m];
    write_moment_table_csv(
        mt, (dir / ("moments_closed_table_" + std::to_string(ti) + ".csv")).string());
  }
  for (const double x : ctx.cfg.gf_points) out.erase(gf_name(x));
  return out;
}

EngineOutput run_moments_truncated(const RunContext& ctx, const std::filesystem::path& dir) {
  const double lambda = annihilation_rate(ctx, "moments_truncated");
  EngineOutput out = prepare_output(ctx);
  const FactorialMoments m0 =
      ctx.cfg.initial.kind == InitialKind::poisson
          ? poisson_moments(ctx.cfg.initial.mean, ctx.cfg.moments_m_max, lambda)
          : point_mass_moments(ctx.cfg.initial.n0, ctx.cfg.moments_m_max, lambda);
  for (std::size_t ti = 0; ti < ctx.cfg.times.size(); ++ti) {
    const TruncatedMomentSolve sol =
        solve_truncated(m0, ctx.cfg.moments_m_max, ctx.cfg.times[ti], ctx.cfg.moments_tol);
    for (const int m : ctx.cfg.moment_orders)
      out["M" + std::to_string(m)].values[ti] = sol.moments.values[m];
    write_moment_table_csv(
        sol.moments,
        (dir / ("moments_truncated_table_" + std::to_string(ti) + ".csv")).string());
  }
  for (const double x : ctx.cfg.gf_points) out.erase(gf_name(x));
  return out;
}

SdeConfig sde_config(const RunContext& ctx) {
  SdeConfig s;
  s.dt = ctx.cfg.sde_dt;
  s.n_paths = ctx.cfg.sde_paths;
  s.seed = ctx.cfg.seed;
  s.blowup_threshold = ctx.cfg.sde_blowup_threshold;
  return s;
}

EngineOutput run_sde(const RunContext& ctx, const std::string& engine,
                     std::map<std::string, std::int64_t>& flagged,
                     const std::filesystem::path& dir) {
  const double lambda = annihilation_rate(ctx, engine);
  const double phi0 = poisson_start(ctx, engine);
  EngineOutput out = prepare_output(ctx, /*with_imag=*/true);
  const SdeConfig scfg = sde_config(ctx);

  // The diffusion runs in rescaled time tau = lambda * t.
  std::vector<double> tau(ctx.cfg.times.size());
  for (std::size_t i = 0; i < tau.size(); ++i) tau[i] = lambda * ctx.cfg.times[i];

  const EnsembleSeries series =
      engine == "sde_em"
          ? simulate_tamed_em(constant_start({phi0, 0.0}), scfg, tau)
          : simulate_reciprocal_exact({phi0, 0.0}, scfg, tau);
  flagged[engine] = series.snapshots.back().flagged_count();

  const int m_top = *std::max_element(ctx.cfg.moment_orders.begin(), ctx.cfg.moment_orders.end());
  for (std::size_t ti = 0; ti < series.snapshots.size(); ++ti) {
    const auto moments = ensemble_complex_moments(series.snapshots[ti], m_top);
    write_complex_moments_csv(
        moments, (dir / (engine + "_moments_" + std::to_string(ti) + ".csv")).string());
    if (ctx.cfg.sde_dump_ensembles)
      write_ensemble_csv(series.snapshots[ti],
                         (dir / (engine + "_ensemble_" + std::to_string(ti) + ".csv")).string());
    for (const int m : ctx.cfg.moment_orders) {
      out["M" + std::to_string(m)].values[ti] = moments[m].value.real();
      out["M" + std::to_string(m)].se[ti] = moments[m].stderr_re;
      out["M" + std::to_string(m) + "_im"].values[ti] = moments[m].value.imag();
      out["M" + std::to_string(m) + "_im"].se[ti] = moments[m].stderr_im;
    }
  }
  for (const double x : ctx.cfg.gf_points) out.erase(gf_name(x));
  return out;
}

void emit_real_ensemble(const RunContext& ctx, const RealEnsemble& ens, std::size_t ti,
                        EngineOutput& out) {
  const std::int64_t n = ens.values.size();
  std::vector<double> work(static_cast<std::size_t>(n));
  auto mean_se_of = [&](auto&& transform) {
    for (std::int64_t i = 0; i < n; ++i) work[static_cast<std::size_t>(i)] = transform(ens.values[i]);
    const double mean = pairwise_sum(std::span<const double>(work)) / static_cast<double>(n);
    double var = 0.0;
    for (double& w : work) {
      const double d = w - mean;
      w = d * d;
    }
    if (n > 1)
      var = pairwise_sum(std::span<const double>(work)) /
            (static_cast<double>(n) * static_cast<double>(n - 1));
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  for (const int m : ctx.cfg.moment_orders) {
    const auto [mean, se] = mean_se_of([m](double v) { return std::pow(v, m); });
    Series& s = out["M" + std::to_string(m)];
    s.values[ti] = mean;
    s.se[ti] = se;
  }
  for (const double x : ctx.cfg.gf_points) {
    const auto [mean, se] = mean_se_of([x](double v) { return std::exp(v * (x - 1.0)); });
    Series& s = out[gf_name(x)];
    s.values[ti] = mean;
    s.se[ti] = se;
  }
}

EngineOutput run_sqbessel(const RunContext& ctx) {
  if (ctx.form != ClosedForm::triplet_equal)
    throw ConfigError("engine 'sqbessel' requires the equal-rate death/birth/branching system",
                      "/reactions");
  const double alpha = ctx.cfg.reactions.channels[0].rate;
  const double phi0 = poisson_start(ctx, "sqbessel");
  EngineOutput out = prepare_output(ctx);
  SdeConfig scfg = sde_config(ctx);
  for (std::size_t ti = 0; ti < ctx.cfg.times.size(); ++ti) {
    scfg.seed = splitmix64(ctx.cfg.seed + 0xbe55ull * ti);
    const RealEnsemble ens = simulate_sqbessel(alpha, phi0, scfg, ctx.cfg.times[ti]);
    emit_real_ensemble(ctx, ens, ti, out);
  }
  return out;
}

EngineOutput run_squared_gaussian(const RunContext& ctx) {
  if (ctx.form != ClosedForm::triplet_two_beta)
    throw ConfigError(
        "engine 'appendix_d' requires the death/birth/branching system with death = "
        "branching = 2x birth",
        "/reactions");
  double beta = 0.0;
  for (const auto& c : ctx.cfg.reactions.channels)
    if (c.reactants == 0 && c.products == 1) beta = c.rate;
  const double phi0 = poisson_start(ctx, "appendix_d");
  EngineOutput out = prepare_output(ctx);
  SdeConfig scfg = sde_config(ctx);
  for (std::size_t ti = 0; ti < ctx.cfg.times.size(); ++ti) {
    scfg.seed = splitmix64(ctx.cfg.seed + 0xdull * ti);
    const RealEnsemble ens = simulate_squared_gaussian(beta, phi0, scfg, ctx.cfg.times[ti]);
    emit_real_ensemble(ctx, ens, ti, out);
  }
  return out;
}

EngineOutput run_genfunc_closed(const RunContext& ctx) {
  EngineOutput out = prepare_output(ctx);
  for (const int m : ctx.cfg.moment_orders) out.erase("M" + std::to_string(m));
  double rate = 0.0;
  switch (ctx.form) {
    case ClosedForm::pure_death:
      rate = ctx.cfg.reactions.channels[0].rate;
      break;
    case ClosedForm::triplet_equal:
      rate = ctx.cfg.reactions.channels[0].rate;
      break;
    case ClosedForm::triplet_two_beta:
      for (const auto& c : ctx.cfg.reactions.channels)
        if (c.reactants == 0 && c.products == 1) rate = c.rate;
      break;
    case ClosedForm::none:
      throw ConfigError(
          "engine 'genfunc_closed' needs a recognized closed form; set closed_form or use a "
          "solvable reaction set",
          "/closed_form");
  }
  for (std::size_t ti = 0; ti < ctx.cfg.times.size(); ++ti) {
    const double t = ctx.cfg.times[ti];
    for (const double x : ctx.cfg.gf_points) {
      double v = 0.0;
      switch (ctx.form) {
        case ClosedForm::pure_death:
          v = closed_pure_death(ctx.g0, rate, t, x);
          break;
        case ClosedForm::triplet_equal:
          v = closed_triplet_equal(ctx.g0, rate, t, x);
          break;
        default:
          v = closed_triplet_two_beta(ctx.g0, rate, t, x);
          break;
      }
      out[gf_name(x)].values[ti] = v;
    }
  }
  return out;
}

EngineOutput run_genfunc_pde(const RunContext& ctx, const std::filesystem::path& dir) {
  const double lambda = annihilation_rate(ctx, "genfunc_pde");
  EngineOutput out = prepare_output(ctx);
  for (const int m : ctx.cfg.moment_orders) out.erase("M" + std::to_string(m));
  GFGrid grid = ctx.cfg.pde_chebyshev ? chebyshev_gf_grid(ctx.g0, ctx.cfg.pde_nodes)
                                      : uniform_gf_grid(ctx.g0, ctx.cfg.pde_nodes);
  auto value_at = [&grid](double x) {
    int lo = 0, hi = static_cast<int>(grid.nodes.size()) - 1;
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      (grid.nodes[mid] <= x ? lo : hi) = mid;
    }
    if (grid.nodes[lo] == x) return grid.values[lo];
    if (grid.nodes[hi] == x) return grid.values[hi];
    const double w = (x - grid.nodes[lo]) / (grid.nodes[hi] - grid.nodes[lo]);
    return (1.0 - w) * grid.values[lo] + w * grid.values[hi];
  };
  for (std::size_t ti = 0; ti < ctx.cfg.times.size(); ++ti) {
    if (ti > 0)
      grid = pde_solve_annihilation(grid, lambda, ctx.cfg.times[ti] - ctx.cfg.times[ti - 1],
                                    ctx.cfg.pde_dt);
    for (const double x : ctx.cfg.gf_points) out[gf_name(x)].values[ti] = value_at(x);
    write_gfgrid_csv(grid, (dir / ("genfunc_pde_grid_" + std::to_string(ti) + ".csv")).string());
  }
  return out;
}

EngineOutput run_distributional(const RunContext& ctx, const std::filesystem::path& dir) {
  const double lambda = annihilation_rate(ctx, "distributional");
  if (ctx.cfg.initial.kind != InitialKind::deterministic || ctx.cfg.initial.n0 % 2 != 0 ||
      ctx.cfg.initial.n0 < 2)
    throw ConfigError(
        "engine 'distributional' evaluates the exact amplitude comb and needs a "
        "deterministic even initial count >= 2",
        "/initial");
  EngineOutput out = prepare_output(ctx);
  const int k0 = ctx.cfg.initial.n0 / 2;
  for (std::size_t ti = 0; ti < ctx.cfg.times.size(); ++ti) {
    const DeltaComb comb = exact_amplitude_comb(k0, lambda, ctx.cfg.times[ti]);
    for (const double x : ctx.cfg.gf_points) out[gf_name(x)].values[ti] = pair_exponential(comb, x);
    for (const int m : ctx.cfg.moment_orders)
      out["M" + std::to_string(m)].values[ti] = pair_polynomial(comb, Polynomial::monomial(m));
    write_comb_csv(comb,
                   (dir / ("distributional_comb_" + std::to_string(ti) + ".csv")).string());

    FactorialMoments comb_moments;
    comb_moments.time = ctx.cfg.times[ti];
    comb_moments.rate = lambda;
    comb_moments.values.resize(comb.coeffs.size());
    for (int m = 0; m < comb_moments.values.size(); ++m)
      comb_moments.values[m] = pair_polynomial(comb, Polynomial::monomial(m));
    const double radius = std::max(1.0, static_cast<double>(2 * k0));
    const std::complex<double> probes[] = {{2.0 * radius + 8.0, 0.0}, {0.0, 2.0 * radius + 8.0}};
    write_laurent_csv(laurent_from_moments(comb_moments), probes, radius,
                      (dir / ("distributional_laurent_" + std::to_string(ti) + ".csv")).string());
  }
  return out;
}

EngineOutput run_engine(const RunContext& ctx, const std::string& name,
                        std::map<std::string, std::int64_t>& flagged,
                        const std::filesystem::path& dir) {
  if (name == "master") return run_master(ctx, dir);
  if (name == "ssa") return run_ssa(ctx, dir);
  if (name == "moments_closed") return run_moments_closed(ctx, dir);
  if (name == "moments_truncated") return run_moments_truncated(ctx, dir);
  if (name == "sde_em" || name == "sde_reciprocal") return run_sde(ctx, name, flagged, dir);
  if (name == "sqbessel") return run_sqbessel(ctx);
  if (name == "appendix_d") return run_squared_gaussian(ctx);
  if (name == "genfunc_closed") return run_genfunc_closed(ctx);
  if (name == "genfunc_pde") return run_genfunc_pde(ctx, dir);
  if (name == "distributional") return run_distributional(ctx, dir);
  throw ConfigError("unknown engine '" + name + "'", "/engines");
}

void write_engine_csv(const std::filesystem::path& path, const EngineOutput& out) {
  CsvWriter csv({"observable", "time", "value", "stderr"});
  for (const auto& [obs, series] : out) {
    for (std::size_t i = 0; i < series.times.size(); ++i) {
      csv.add_row({obs, format_double(series.times[i]), format_double(series.values[i]),
                   format_double(series.se[i])});
    }
  }
  csv.write(path.string());
}

json report_to_json(const CompareReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"observable", r.observable},
                    {"time", r.time},
                    {"engine_a", r.engine_a},
                    {"engine_b", r.engine_b},
                    {"value_a", r.value_a},
                    {"value_b", r.value_b},
                    {"diff", r.diff},
                    {"tol", r.tol},
                    {"pass", r.pass}});
  }
  return {{"all_pass", report.all_pass()}, {"rows", rows}};
}

}  // namespace

RunResult run(const RunConfig& config) {
  const RunContext ctx = make_context(config);

  std::string out_dir = config.output_dir.empty() ? "out/" + config.scenario : config.output_dir;
  if (const char* env = std::getenv("ANNIH_OUTPUT_DIR")) out_dir = env;
  RunResult result;
  result.directory = out_dir;
  std::filesystem::create_directories(result.directory);

  std::map<std::string, EngineOutput> outputs;
  for (const auto& name : config.engines) {
    try {
      outputs[name] = run_engine(ctx, name, result.flagged_paths, result.directory);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw EngineError(e.what(), name);
    }
    write_engine_csv(result.directory / (name + ".csv"), outputs.at(name));
  }

  for (std::size_t i = 0; i < config.engines.size(); ++i) {
    for (std::size_t k = i + 1; k < config.engines.size(); ++k) {
      const auto& na = config.engines[i];
      const auto& nb = config.engines[k];
      CompareReport pair = compare_series(na, outputs.at(na), nb, outputs.at(nb), config.compare);
      result.report.rows.insert(result.report.rows.end(), pair.rows.begin(), pair.rows.end());
    }
  }

  CsvWriter report_csv({"observable", "time", "engine_a", "engine_b", "value_a", "value_b",
                        "diff", "tol", "pass"});
  for (const auto& r : result.report.rows) {
    report_csv.add_row({r.observable, format_double(r.time), r.engine_a, r.engine_b,
                        format_double(r.value_a), format_double(r.value_b),
                        format_double(r.diff), format_double(r.tol), r.pass ? "1" : "0"});
  }
  report_csv.write((result.directory / "compare_report.csv").string());

  std::ofstream report_json(result.directory / "compare_report.json");
  report_json << report_to_json(result.report).dump(2) << "\n";

  json reactions = json::array();
  for (const auto& c : config.reactions.channels)
    reactions.push_back(
        {{"reactants", c.reactants}, {"products", c.products}, {"rate", c.rate}});
  json initial = config.initial.kind == InitialKind::deterministic
                     ? json{{"kind", "deterministic"}, {"n", config.initial.n0}}
                     : json{{"kind", "poisson"},
                            {"mean", config.initial.mean},
                            {"tail_tol", config.initial.tail_tol}};
  json engine_settings;
  for (const auto& name : config.engines) {
    json s;
    if (name == "master") s = {{"tol", config.master_tol}, {"n_max", ctx.n_max}};
    if (name == "ssa") s = {{"paths", config.ssa_paths}, {"n_max", ctx.n_max}};
    if (name == "sde_em" || name == "sde_reciprocal")
      s = {{"dt", config.sde_dt},
           {"paths", config.sde_paths},
           {"blowup_threshold", config.sde_blowup_threshold}};
    if (name == "sqbessel" || name == "appendix_d")
      s = {{"dt", config.sde_dt}, {"paths", config.sde_paths}};
    if (name == "moments_closed" || name == "moments_truncated")
      s = {{"m_max", config.moments_m_max}, {"tol", config.moments_tol}};
    if (name == "genfunc_pde")
      s = {{"nodes", config.pde_nodes},
           {"dt", config.pde_dt},
           {"chebyshev", config.pde_chebyshev}};
    engine_settings[name] = s;
  }
  const auto now = std::chrono::system_clock::now();
  json manifest = {
      {"scenario", config.scenario},
      {"created_unix_ms",
       std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count()},
      {"seed", config.seed},
      {"times", config.times},
      {"reactions", reactions},
      {"initial", initial},
      {"engines", engine_settings},
      {"compare",
       {{"rule", config.compare.rule},
        {"k", config.compare.k},
        {"abs", config.compare.abs_tol},
        {"rel", config.compare.rel_tol},
        {"abs_floor", config.compare.abs_floor}}},
      {"flagged_paths", result.flagged_paths},
      {"versions",
       {{"annih", kVersion},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                      "." + std::to_string(EIGEN_MINOR_VERSION)}}}};
  std::ofstream manifest_out(result.directory / "manifest.json");
  manifest_out << manifest.dump(2) << "\n";

  return result;
}

}  // namespace annih
