#include "annih/sde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "annih/errors.hpp"
#include "annih/numeric.hpp"

namespace annih {

void SdeConfig::validate() const {
  if (!(dt > 0)) throw std::invalid_argument("sde config: dt must be positive");
  if (n_paths < 1) throw std::invalid_argument("sde config: n_paths < 1");
  if (blowup_threshold < 1e3)
    throw std::invalid_argument("sde config: blowup_threshold must be >= 1e3");
  if (!(lambda > 0)) throw std::invalid_argument("sde config: lambda must be positive");
}

std::int64_t ComplexEnsemble::alive_count() const {
  std::int64_t n = 0;
  for (const auto a : alive) n += a ? 1 : 0;
  return n;
}

StartSampler constant_start(std::complex<double> phi0) {
  return [phi0](RngStream&) { return phi0; };
}

namespace {

void check_snapshots(std::span<const double> times) {
  if (times.empty()) throw std::invalid_argument("simulate: no snapshot times");
  double prev = -1.0;
  for (const double t : times) {
    if (t < 0 || t <= prev) throw std::invalid_argument("simulate: snapshot times must increase and be >= 0");
    prev = t;
  }
}

template <typename PathFn>
void run_paths(std::int64_t n_paths, int n_threads, PathFn&& fn) {
  n_threads = std::max(1, n_threads);
  if (n_threads == 1) {
    for (std::int64_t p = 0; p < n_paths; ++p) fn(p);
    return;
  }
  std::vector<std::thread> pool;
  const std::int64_t chunk = (n_paths + n_threads - 1) / n_threads;
  for (int tid = 0; tid < n_threads; ++tid) {
    const std::int64_t begin = tid * chunk;
    const std::int64_t end = std::min<std::int64_t>(n_paths, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (std::int64_t p = begin; p < end; ++p) fn(p);
    });
  }
  for (auto& th : pool) th.join();
}

EnsembleSeries make_series(const SdeConfig& cfg, std::span<const double> times) {
  EnsembleSeries series;
  series.snapshots.resize(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    auto& snap = series.snapshots[k];
    snap.points.resize(cfg.n_paths);
    snap.alive.assign(static_cast<std::size_t>(cfg.n_paths), 1);
    snap.time = times[k];
    snap.seed = cfg.seed;
  }
  return series;
}

void init_monitor(ModulusMonitor* monitor, std::int64_t n_paths) {
  if (!monitor) return;
  monitor->window_min =
      Eigen::VectorXd::Constant(n_paths, std::numeric_limits<double>::infinity());
  monitor->global_min =
      Eigen::VectorXd::Constant(n_paths, std::numeric_limits<double>::infinity());
}

inline void observe_modulus(ModulusMonitor* monitor, std::int64_t p, double t, double mod) {
  if (!monitor) return;
  if (mod < monitor->global_min[p]) monitor->global_min[p] = mod;
  if (t >= monitor->window_begin && t <= monitor->window_end &&
      mod < monitor->window_min[p])
    monitor->window_min[p] = mod;
}

void require_survivors(const EnsembleSeries& series) {
  if (series.snapshots.back().alive_count() == 0)
    throw EmptyEnsembleError("simulate: every path was flagged");
}

}  // namespace

EnsembleSeries simulate_tamed_em(const StartSampler& start, const SdeConfig& cfg,
                                 std::span<const double> snapshot_times,
                                 ModulusMonitor* monitor, std::uint32_t stream_tag) {
  cfg.validate();
  check_snapshots(snapshot_times);
  EnsembleSeries series = make_series(cfg, snapshot_times);
  init_monitor(monitor, cfg.n_paths);
  const double thr2 = cfg.blowup_threshold * cfg.blowup_threshold;

  run_paths(cfg.n_paths, cfg.n_threads, [&](std::int64_t p) {
    RngStream rng(cfg.seed, static_cast<std::uint64_t>(p), stream_tag);
    std::complex<double> z = start(rng);
    double re = z.real(), im = z.imag();
    bool alive = re * re + im * im <= thr2;
    double t = 0.0;
    observe_modulus(monitor, p, t, std::hypot(re, im));
    for (std::size_t k = 0; k < snapshot_times.size(); ++k) {
      const double target = snapshot_times[k];
      while (t < target - 1e-15) {
        const double h = std::min(cfg.dt, target - t);
        if (alive) {
          const double dw = cfg.zero_noise_hook ? 0.0 : std::sqrt(h) * rng.normal();
          const double mod2 = re * re + im * im;
          const double tame = 1.0 / (1.0 + h * mod2);
          const double re_new = re + (-(re * re - im * im) * tame) * h - im * dw;
          const double im_new = im + (-2.0 * re * im * tame) * h + re * dw;
          re = re_new;
          im = im_new;
          if (re * re + im * im > thr2) alive = false;
        }
        t += h;
        if (alive) observe_modulus(monitor, p, t, std::hypot(re, im));
      }
      t = target;
      series.snapshots[k].points[p] = {re, im};
      series.snapshots[k].alive[p] = alive ? 1 : 0;
    }
  });
  require_survivors(series);
  return series;
}

ComplexEnsemble simulate_tamed_em(const StartSampler& start, const SdeConfig& cfg,
                                  double t_end) {
  const double times[] = {t_end};
  return std::move(simulate_tamed_em(start, cfg, times).snapshots.front());
}

EnsembleSeries simulate_reciprocal_exact(std::complex<double> phi0, const SdeConfig& cfg,
                                         std::span<const double> snapshot_times,
                                         ModulusMonitor* monitor, std::uint32_t stream_tag) {
  cfg.validate();
  check_snapshots(snapshot_times);
  if (!(std::abs(phi0) > 0))
    throw std::invalid_argument("simulate_reciprocal_exact: phi0 must be nonzero");
  EnsembleSeries series = make_series(cfg, snapshot_times);
  init_monitor(monitor, cfg.n_paths);
  const std::complex<double> xi0 = 1.0 / phi0;

  run_paths(cfg.n_paths, cfg.n_threads, [&](std::int64_t p) {
    RngStream rng(cfg.seed, static_cast<std::uint64_t>(p), stream_tag);
    double t = 0.0;
    double w = 0.0;
    double es = 1.0;         // e^{t/2}, advanced multiplicatively per step
    double exp_half = 0.0;   // e^{h/2} for the current step size
    double h_cached = -1.0;
    std::complex<double> integral = 0.0;
    std::complex<double> g_prev = 1.0;  // e^{s/2 + i W_s} at s = t
    std::complex<double> xi = xi0;
    std::complex<double> phi = phi0;
    bool alive = std::abs(xi) >= 1e-12;
    observe_modulus(monitor, p, t, std::abs(phi));

    for (std::size_t k = 0; k < snapshot_times.size(); ++k) {
      const double target = snapshot_times[k];
      while (t < target - 1e-15) {
        const double h = std::min(cfg.dt, target - t);
        if (alive) {
          if (h != h_cached) {
            exp_half = std::exp(0.5 * h);
            h_cached = h;
          }
          const double dw = cfg.zero_noise_hook ? 0.0 : std::sqrt(h) * rng.normal();
          w += dw;
          es *= exp_half;
          const std::complex<double> g_new = es * std::complex<double>(std::cos(w), std::sin(w));
          integral += (0.5 * h) * (g_prev + g_new);
          g_prev = g_new;
          xi = (xi0 + integral) * std::complex<double>(std::cos(w), -std::sin(w)) / es;
          if (std::abs(xi) < 1e-12) {
            alive = false;
          } else {
            phi = 1.0 / xi;
          }
        }
        t += h;
        if (alive) observe_modulus(monitor, p, t, std::abs(phi));
      }
      t = target;
      series.snapshots[k].points[p] = phi;
      series.snapshots[k].alive[p] = alive ? 1 : 0;
    }
  });
  require_survivors(series);
  return series;
}

ComplexEnsemble simulate_reciprocal_exact(std::complex<double> phi0, const SdeConfig& cfg,
                                          double t_end) {
  const double times[] = {t_end};
  return std::move(simulate_reciprocal_exact(phi0, cfg, times).snapshots.front());
}

ModulusBounds modulus_bounds(double mod_star, double delta_t) {
  if (mod_star < 0) throw std::invalid_argument("modulus_bounds: mod_star < 0");
  ModulusBounds b;
  const double growth = std::exp(0.5 * delta_t);
  const double spread = 2.0 * mod_star * (growth - 1.0);
  b.lower = mod_star * growth / (1.0 + spread);
  b.upper = spread < 1.0 ? mod_star * growth / (1.0 - spread)
                         : std::numeric_limits<double>::infinity();
  b.blowup_floor = mod_star > 0 ? 2.0 * std::log1p(1.0 / (2.0 * mod_star))
                                : std::numeric_limits<double>::infinity();
  return b;
}

PathBoundsReport check_path_bounds(const EnsembleSeries& series, double tol) {
  if (series.snapshots.empty()) throw std::invalid_argument("check_path_bounds: empty series");
  const auto& first = series.snapshots.front();
  const std::int64_t n = first.points.size();
  for (const auto& s : series.snapshots)
    if (s.points.size() != n) throw std::invalid_argument("check_path_bounds: ragged series");

  PathBoundsReport report;
  const auto& last_alive = series.snapshots.back().alive;
  for (std::int64_t p = 0; p < n; ++p) {
    if (!last_alive[p]) continue;
    ++report.paths_checked;
    const double m_star = std::abs(first.points[p]);
    bool reached_half = m_star >= 0.5;
    for (std::size_t k = 1; k < series.snapshots.size(); ++k) {
      const auto& snap = series.snapshots[k];
      const double mod = std::abs(snap.points[p]);
      const ModulusBounds b = modulus_bounds(m_star, snap.time - first.time);
      ++report.snapshots_checked;
      if (mod < b.lower - tol || mod > b.upper + tol) ++report.sandwich_violations;
      if (reached_half && mod < 0.5 - tol) ++report.persistence_violations;
      if (mod >= 0.5) reached_half = true;
    }
  }
  return report;
}

namespace {

struct MeanVar {
  double mean = 0.0;
  double se = 0.0;
};

// Two-pass mean and standard error with pairwise sums; the reduction tree
// depends only on the value count, never on thread layout.
MeanVar mean_se(std::span<const double> v) {
  MeanVar r;
  if (v.empty()) return r;
  const double n = static_cast<double>(v.size());
  r.mean = pairwise_sum(v) / n;
  if (v.size() < 2) return r;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - r.mean;
    sq[i] = d * d;
  }
  r.se = std::sqrt(pairwise_sum(std::span<const double>(sq)) / (n * (n - 1.0)));
  return r;
}

}  // namespace

std::vector<MomentEstimate> ensemble_complex_moments(const ComplexEnsemble& ens, int m_max) {
  if (m_max < 0) throw std::invalid_argument("ensemble_complex_moments: m_max < 0");
  const std::int64_t alive = ens.alive_count();
  if (alive < 100)
    throw InsufficientEnsembleError("ensemble_complex_moments: fewer than 100 unflagged paths");

  std::vector<std::complex<double>> pw(static_cast<std::size_t>(alive), 1.0);
  std::vector<double> re(pw.size()), im(pw.size());
  std::vector<MomentEstimate> out;
  out.reserve(m_max + 1);
  out.push_back({0, {1.0, 0.0}, 0.0, 0.0});

  for (int m = 1; m <= m_max; ++m) {
    std::size_t i = 0;
    for (std::int64_t p = 0; p < ens.points.size(); ++p) {
      if (!ens.alive[p]) continue;
      pw[i] *= ens.points[p];
      re[i] = pw[i].real();
      im[i] = pw[i].imag();
      ++i;
    }
    const MeanVar mre = mean_se(re);
    const MeanVar mim = mean_se(im);
    out.push_back({m, {mre.mean, mim.mean}, mre.se, mim.se});
  }
  return out;
}

RealEnsemble simulate_sqbessel(double alpha, double phi0, const SdeConfig& cfg, double t_end) {
  cfg.validate();
  if (!(alpha > 0)) throw std::invalid_argument("simulate_sqbessel: alpha must be positive");
  if (phi0 < 0) throw std::invalid_argument("simulate_sqbessel: phi0 < 0");
  if (t_end < 0) throw std::invalid_argument("simulate_sqbessel: t_end < 0");
  RealEnsemble ens;
  ens.values.resize(cfg.n_paths);
  ens.time = t_end;
  ens.seed = cfg.seed;
  run_paths(cfg.n_paths, cfg.n_threads, [&](std::int64_t p) {
    RngStream rng(cfg.seed, static_cast<std::uint64_t>(p), kTagSqBessel);
    double phi = phi0;
    double t = 0.0;
    while (t < t_end - 1e-15) {
      const double h = std::min(cfg.dt, t_end - t);
      const double dw = cfg.zero_noise_hook ? 0.0 : std::sqrt(h) * rng.normal();
      phi += alpha * h + std::sqrt(2.0 * alpha * std::max(phi, 0.0)) * dw;
      t += h;
    }
    ens.values[p] = phi;
  });
  return ens;
}

RealEnsemble simulate_squared_gaussian(double beta, double phi0, const SdeConfig& cfg,
                                       double t_end) {
  cfg.validate();
  if (!(beta > 0))
    throw std::invalid_argument("simulate_squared_gaussian: beta must be positive");
  if (phi0 < 0) throw std::invalid_argument("simulate_squared_gaussian: phi0 < 0");
  if (t_end < 0) throw std::invalid_argument("simulate_squared_gaussian: t_end < 0");
  RealEnsemble ens;
  ens.values.resize(cfg.n_paths);
  ens.time = t_end;
  ens.seed = cfg.seed;
  const double root0 = std::sqrt(phi0);
  const double rootb = std::sqrt(beta);
  const double roott = std::sqrt(t_end);
  run_paths(cfg.n_paths, cfg.n_threads, [&](std::int64_t p) {
    RngStream rng(cfg.seed, static_cast<std::uint64_t>(p), kTagSquaredGaussian);
    const double wt = cfg.zero_noise_hook ? 0.0 : roott * rng.normal();
    const double root = root0 + rootb * wt;
    ens.values[p] = root * root;
  });
  return ens;
}

std::complex<double> expected_reciprocal(std::complex<double> xi0, double t) {
  return 1.0 + (xi0 - 1.0) * std::exp(-t);
}

MeanEstimate ensemble_mean(const RealEnsemble& ens) {
  std::vector<double> v(ens.values.data(), ens.values.data() + ens.values.size());
  const MeanVar r = mean_se(v);
  return {r.mean, r.se};
}

MeanEstimate ensemble_mean_exp(const RealEnsemble& ens, double u) {
  std::vector<double> v(static_cast<std::size_t>(ens.values.size()));
  for (std::int64_t i = 0; i < ens.values.size(); ++i) v[i] = std::exp(u * ens.values[i]);
  const MeanVar r = mean_se(v);
  return {r.mean, r.se};
}

ComplexMeanEstimate ensemble_mean_reciprocal(const ComplexEnsemble& ens) {
  const std::int64_t alive = ens.alive_count();
  if (alive < 2)
    throw InsufficientEnsembleError("ensemble_mean_reciprocal: too few unflagged paths");
  std::vector<double> re, im;
  re.reserve(alive);
  im.reserve(alive);
  for (std::int64_t p = 0; p < ens.points.size(); ++p) {
    if (!ens.alive[p]) continue;
    const std::complex<double> xi = 1.0 / ens.points[p];
    re.push_back(xi.real());
    im.push_back(xi.imag());
  }
  const MeanVar mre = mean_se(re);
  const MeanVar mim = mean_se(im);
  return {{mre.mean, mim.mean}, mre.se, mim.se};
}

}  // namespace annih
