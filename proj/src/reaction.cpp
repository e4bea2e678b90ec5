#include "annih/reaction.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "annih/errors.hpp"
#include "annih/numeric.hpp"
#include "annih/ode.hpp"
#include "annih/rng.hpp"

namespace annih {

void validate(const ReactionSpec& spec) {
  if (spec.channels.empty()) throw std::invalid_argument("reaction spec: no channels");
  std::set<std::pair<int, int>> seen;
  for (const auto& c : spec.channels) {
    if (c.reactants < 0 || c.products < 0)
      throw std::invalid_argument("reaction channel: negative stoichiometry");
    if (c.reactants == c.products)
      throw std::invalid_argument("reaction channel: reactants == products");
    if (!(c.rate > 0)) throw std::invalid_argument("reaction channel: rate must be positive");
    if (!seen.insert({c.reactants, c.products}).second)
      throw std::invalid_argument("reaction spec: duplicate (j, l) channel");
  }
}

bool no_growth(const ReactionSpec& spec) {
  return std::all_of(spec.channels.begin(), spec.channels.end(),
                     [](const ReactionChannel& c) { return c.products < c.reactants; });
}

void CountDistribution::validate() const {
  if (probs.size() < 1) throw std::invalid_argument("count distribution: empty");
  for (int n = 0; n < probs.size(); ++n) {
    if (probs[n] < -1e-12)
      throw std::invalid_argument("count distribution: P_" + std::to_string(n) +
                                  " below -1e-12");
  }
  const double sum = probs.sum();
  if (std::abs(sum - 1.0) > sum_tol)
    throw std::invalid_argument("count distribution: probability sum off by " +
                                std::to_string(sum - 1.0));
  if (probs[probs.size() - 1] > tail_tol)
    throw std::invalid_argument("count distribution: top-bin mass exceeds tail tolerance");
}

Eigen::VectorXd CountDistribution::exported_probs() const {
  return probs.cwiseMax(0.0);
}

CountDistribution deterministic_initial(int n0, int n_max, double tail_tol) {
  if (n0 < 0 || n_max < n0)
    throw std::invalid_argument("deterministic_initial: need 0 <= n0 <= n_max");
  CountDistribution d;
  d.probs = Eigen::VectorXd::Zero(n_max + 1);
  d.probs[n0] = 1.0;
  d.tail_tol = tail_tol;
  return d;
}

CountDistribution truncated_poisson_initial(double mu, int n_max, double tail_tol) {
  if (!(mu > 0)) throw std::invalid_argument("truncated_poisson_initial: mu must be positive");
  if (n_max < 0) throw std::invalid_argument("truncated_poisson_initial: n_max < 0");
  Eigen::VectorXd w(n_max + 1);
  double v = std::exp(-mu);
  for (int n = 0; n <= n_max; ++n) {
    w[n] = v;
    v *= mu / (n + 1);
  }
  const double kept = w.sum();
  const double dropped = 1.0 - kept;
  if (dropped > tail_tol) {
    int need = n_max;
    double tail = dropped;
    double term = v;  // first omitted weight
    while (tail > tail_tol && need < 100000) {
      ++need;
      tail -= term;
      term *= mu / (need + 1);
    }
    throw TruncationOverflowError(
        "truncated_poisson_initial: discarded tail " + std::to_string(dropped) +
            " exceeds tolerance; n_max >= " + std::to_string(need + 1) + " required",
        need + 1);
  }
  CountDistribution d;
  d.probs = w / kept;
  d.tail_tol = tail_tol;
  d.discarded_tail = dropped;
  return d;
}

RateGenerator build_generator(const ReactionSpec& spec, int n_max) {
  validate(spec);
  int max_j = 0;
  for (const auto& c : spec.channels) max_j = std::max(max_j, c.reactants);
  if (n_max < max_j)
    throw InvalidTruncationError("build_generator: n_max below the largest reactant count");

  RateGenerator gen;
  gen.n_max = n_max;
  gen.overflow_rate = Eigen::VectorXd::Zero(n_max + 1);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(n_max + 1) * (spec.channels.size() + 1));
  for (int n = 0; n <= n_max; ++n) {
    double outflow = 0.0;
    for (const auto& c : spec.channels) {
      const double r = c.rate * binomial(n, c.reactants);
      if (r == 0.0) continue;
      outflow += r;
      const int target = n - c.reactants + c.products;
      if (target <= n_max) {
        trips.emplace_back(target, n, r);
      } else {
        gen.overflow_rate[n] += r;
      }
    }
    if (outflow != 0.0) trips.emplace_back(n, n, -outflow);
  }
  gen.q.resize(n_max + 1, n_max + 1);
  gen.q.setFromTriplets(trips.begin(), trips.end());
  return gen;
}

CountDistribution master_evolve(const RateGenerator& gen, const CountDistribution& p0,
                                double t_end, double tol) {
  return master_evolve(gen, p0, t_end, tol, tol * 1e-3);
}

CountDistribution master_evolve(const RateGenerator& gen, const CountDistribution& p0,
                                double t_end, double tol, double atol) {
  if (!(tol > 0)) throw std::invalid_argument("master_evolve: tol must be positive");
  if (t_end < 0) throw std::invalid_argument("master_evolve: t_end < 0");
  if (p0.n_max() != gen.n_max)
    throw std::invalid_argument("master_evolve: distribution/generator size mismatch");
  p0.validate();
  if (t_end == 0.0) return p0;

  // State = (P_0..P_nmax, overflow mass); the total is a linear invariant of
  // the extended system, which explicit RK preserves to round-off.
  const int n = gen.n_max + 1;
  Eigen::VectorXd y(n + 1);
  y.head(n) = p0.probs;
  y[n] = p0.overflow_mass;

  auto rhs = [&gen, n](const Eigen::VectorXd& v, Eigen::VectorXd& d) {
    d.head(n).noalias() = gen.q * v.head(n);
    d[n] = gen.overflow_rate.dot(v.head(n));
  };

  OdeControl ctl;
  ctl.rtol = tol;
  ctl.atol = atol;
  const Eigen::VectorXd yend = rk45_integrate(rhs, y, 0.0, t_end, ctl);

  CountDistribution out = p0;
  out.probs = yend.head(n);
  out.overflow_mass = yend[n];
  out.time = p0.time + t_end;
  if (out.overflow_mass > p0.tail_tol) {
    const int required = gen.n_max + std::max(8, gen.n_max / 2);
    throw TruncationOverflowError(
        "master_evolve: overflow mass " + std::to_string(out.overflow_mass) +
            " exceeds the declared tail tolerance; retry with n_max >= " +
            std::to_string(required),
        required);
  }
  return out;
}

namespace {

int sample_index(const Eigen::VectorXd& probs, double u) {
  double acc = 0.0;
  const int last = static_cast<int>(probs.size()) - 1;
  for (int k = 0; k < last; ++k) {
    acc += probs[k];
    if (u < acc) return k;
  }
  return last;
}

}  // namespace

CountDistribution ssa_ensemble(const ReactionSpec& spec, const CountDistribution& init,
                               double t_end, std::int64_t n_paths, std::uint64_t seed,
                               int n_threads, std::vector<SsaEventLog>* event_logs) {
  validate(spec);
  init.validate();
  if (n_paths < 1) throw std::invalid_argument("ssa_ensemble: n_paths < 1");
  if (t_end < 0) throw std::invalid_argument("ssa_ensemble: t_end < 0");
  n_threads = std::max(1, n_threads);

  const Eigen::VectorXd init_probs = init.exported_probs();
  if (event_logs) event_logs->assign(static_cast<std::size_t>(n_paths), {});

  const int n_channels = static_cast<int>(spec.channels.size());
  std::vector<std::vector<std::int64_t>> counts(n_threads);

  auto worker = [&](int tid, std::int64_t begin, std::int64_t end) {
    auto& local = counts[tid];
    std::vector<double> channel_rate(n_channels);
    for (std::int64_t p = begin; p < end; ++p) {
      RngStream rng(seed, static_cast<std::uint64_t>(p));
      int n = sample_index(init_probs, rng.uniform01());
      double t = 0.0;
      SsaEventLog* log = event_logs ? &(*event_logs)[p] : nullptr;
      if (log) {
        log->times.push_back(0.0);
        log->states.push_back(n);
      }
      while (true) {
        double total = 0.0;
        for (int c = 0; c < n_channels; ++c) {
          channel_rate[c] = spec.channels[c].rate * binomial(n, spec.channels[c].reactants);
          total += channel_rate[c];
        }
        if (total <= 0.0) break;
        t += rng.exponential(total);
        if (t > t_end) break;
        double pick = rng.uniform01() * total;
        int chosen = n_channels - 1;
        for (int c = 0; c < n_channels; ++c) {
          pick -= channel_rate[c];
          if (pick < 0) {
            chosen = c;
            break;
          }
        }
        n += spec.channels[chosen].products - spec.channels[chosen].reactants;
        if (log) {
          log->times.push_back(t);
          log->states.push_back(n);
        }
      }
      if (n >= static_cast<int>(local.size())) local.resize(n + 1, 0);
      ++local[n];
    }
  };

  if (n_threads == 1) {
    worker(0, 0, n_paths);
  } else {
    std::vector<std::thread> pool;
    const std::int64_t chunk = (n_paths + n_threads - 1) / n_threads;
    for (int tid = 0; tid < n_threads; ++tid) {
      const std::int64_t begin = tid * chunk;
      const std::int64_t end = std::min<std::int64_t>(n_paths, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, tid, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  std::size_t top = static_cast<std::size_t>(init.n_max()) + 1;
  for (const auto& local : counts) top = std::max(top, local.size());
  Eigen::VectorXd probs = Eigen::VectorXd::Zero(static_cast<int>(top));
  for (const auto& local : counts)
    for (std::size_t k = 0; k < local.size(); ++k) probs[static_cast<int>(k)] += local[k];
  probs /= static_cast<double>(n_paths);

  CountDistribution out;
  out.probs = probs;
  out.time = t_end;
  out.n_samples = n_paths;
  out.stderrs = (probs.array() * (1.0 - probs.array()) / static_cast<double>(n_paths))
                    .cwiseMax(0.0)
                    .sqrt();
  return out;
}

FactorialMoments factorial_moments(const CountDistribution& dist, int m_max, double lambda) {
  if (m_max < 0) throw std::invalid_argument("factorial_moments: m_max < 0");
  FactorialMoments m;
  m.rate = lambda;
  m.time = dist.time;
  m.values = Eigen::VectorXd::Zero(m_max + 1);
  for (int n = 0; n < dist.probs.size(); ++n) {
    double w = 1.0;
    for (int k = 0; k <= m_max; ++k) {
      m.values[k] += w * dist.probs[n];
      w *= static_cast<double>(n - k);
      if (k >= n) break;  // falling factorial vanished
    }
  }
  return m;
}

double factorial_moment_se(const CountDistribution& dist, int m) {
  if (dist.n_samples <= 0) return 0.0;
  double mean = 0.0, second = 0.0;
  for (int n = 0; n < dist.probs.size(); ++n) {
    const double f = falling_factorial(n, m);
    mean += f * dist.probs[n];
    second += f * f * dist.probs[n];
  }
  const double var = std::max(0.0, second - mean * mean);
  return std::sqrt(var / static_cast<double>(dist.n_samples));
}

double parity(const CountDistribution& dist) {
  double even = 0.0, odd = 0.0;
  for (int n = 0; n < dist.probs.size(); ++n) {
    (n % 2 == 0 ? even : odd) += dist.probs[n];
  }
  return even - odd;
}

int default_n_max(const ReactionSpec& spec, double init_mean, int init_support_max,
                  double t_max, double tail_tol) {
  validate(spec);
  if (no_growth(spec)) return init_support_max;

  // Mean-field flow of the count mean, integrated with fixed RK4 steps; the
  // running max sizes the truncation.
  auto drift = [&spec](double mu) {
    double d = 0.0;
    for (const auto& c : spec.channels) {
      double prop = c.rate;
      for (int i = 0; i < c.reactants; ++i) prop *= mu / (i + 1);
      d += prop * (c.products - c.reactants);
    }
    return d;
  };
  double mu = std::max(init_mean, 1e-9);
  double mu_max = mu;
  const int steps = 2000;
  const double h = t_max / steps;
  for (int s = 0; s < steps; ++s) {
    const double k1 = drift(mu);
    const double k2 = drift(std::max(0.0, mu + 0.5 * h * k1));
    const double k3 = drift(std::max(0.0, mu + 0.5 * h * k2));
    const double k4 = drift(std::max(0.0, mu + h * k3));
    mu = std::max(0.0, mu + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4));
    mu_max = std::max(mu_max, mu);
  }

  // Smallest N with a Poisson(mu_max) tail below tail_tol, plus headroom for
  // fluctuations above the mean-field envelope.
  double term = std::exp(-mu_max);
  double cdf = term;
  int n = 0;
  while (1.0 - cdf > tail_tol && n < 100000) {
    ++n;
    term *= mu_max / n;
    cdf += term;
  }
  // Branching channels overdisperse the law toward a geometric tail with the
  // same mean; cover that envelope as well.
  const int n_geo = static_cast<int>(
      std::ceil(std::log(tail_tol) / std::log(mu_max / (1.0 + mu_max))));
  return std::max({init_support_max, n + 15, n_geo});
}

}  // namespace annih
