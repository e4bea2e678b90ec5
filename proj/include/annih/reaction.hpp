#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <vector>

#include "annih/moments.hpp"

namespace annih {

// One reaction channel: j reactants -> l products at rate `rate` per
// j-combination of particles.
struct ReactionChannel {
  int reactants = 0;  // j
  int products = 0;   // l
  double rate = 0.0;  // per unit time
};

struct ReactionSpec {
  std::vector<ReactionChannel> channels;
};

// Throws std::invalid_argument on violated invariants (j == l, rate <= 0,
// negative counts, duplicate (j, l) pairs, empty channel list).
void validate(const ReactionSpec& spec);

// True when every channel consumes particles (l < j), so counts never grow.
bool no_growth(const ReactionSpec& spec);

// Truncated probability vector over particle counts at one time stamp.
// Tolerances are declared at construction and travel with the object.
struct CountDistribution {
  Eigen::VectorXd probs;  // index n = P_n, size n_max + 1
  double time = 0.0;
  double sum_tol = 1e-8;
  double tail_tol = 1.0;        // acceptable mass at/ beyond the top bin
  double discarded_tail = 0.0;  // mass dropped when truncating the initial law
  double overflow_mass = 0.0;   // mass redirected past n_max during evolution

  // Empirical metadata; n_samples == 0 means the law is exact.
  std::int64_t n_samples = 0;
  Eigen::VectorXd stderrs;

  int n_max() const { return static_cast<int>(probs.size()) - 1; }
  void validate() const;
  // Round-off negatives are clipped only here, never during integration.
  Eigen::VectorXd exported_probs() const;
};

// Point mass at n0.
CountDistribution deterministic_initial(int n0, int n_max, double tail_tol = 1.0);
// Renormalized truncation of a Poisson(mu) law; throws TruncationOverflowError
// (naming a sufficient n_max) if the discarded tail exceeds tail_tol.
CountDistribution truncated_poisson_initial(double mu, int n_max, double tail_tol = 1e-12);

// Sparse transition-rate table of the chain restricted to {0..n_max}.
// q(m, n) holds the rate n -> m for m != n; q(n, n) is minus the total
// outflow. Transitions that would land above n_max are redirected to an
// absorbing overflow counter with per-state rates `overflow_rate`.
struct RateGenerator {
  int n_max = 0;
  Eigen::SparseMatrix<double> q;
  Eigen::VectorXd overflow_rate;
};

RateGenerator build_generator(const ReactionSpec& spec, int n_max);

// Integrates dP/dt = Q P to t_end with adaptive embedded RK(4/5). `tol`
// bounds the local error per unit time with per-component scale
// atol + tol*|P_n|; the default floor keeps runs fast when exponentially
// small states need no relative resolution, atol = 0 resolves every state.
CountDistribution master_evolve(const RateGenerator& gen, const CountDistribution& p0,
                                double t_end, double tol);
CountDistribution master_evolve(const RateGenerator& gen, const CountDistribution& p0,
                                double t_end, double tol, double atol);

struct SsaEventLog {
  std::vector<double> times;
  std::vector<int> states;  // state entered at the matching time
};

// Exact event-driven sampling of the chain. Each path draws from the
// substream keyed by (seed, path index), so results are bit-identical for
// any n_threads. Per-bin standard errors are sqrt(p(1-p)/n_paths).
CountDistribution ssa_ensemble(const ReactionSpec& spec, const CountDistribution& init,
                               double t_end, std::int64_t n_paths, std::uint64_t seed,
                               int n_threads = 1,
                               std::vector<SsaEventLog>* event_logs = nullptr);

// M_m = sum_n n(n-1)...(n-m+1) P_n for m = 0..m_max.
FactorialMoments factorial_moments(const CountDistribution& dist, int m_max,
                                   double lambda = 1.0);
// Standard error of the empirical factorial moment (0 for exact laws).
double factorial_moment_se(const CountDistribution& dist, int m);

// Even-minus-odd probability mass.
double parity(const CountDistribution& dist);

// Truncation bound heuristic: for no-growth specs the initial support
// suffices; otherwise the bound is sized so a Poisson tail at the largest
// mean reached by the mean-field flow stays below tail_tol.
int default_n_max(const ReactionSpec& spec, double init_mean, int init_support_max,
                  double t_max, double tail_tol = 1e-12);

}  // namespace annih
