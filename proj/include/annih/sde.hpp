#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "annih/rng.hpp"

namespace annih {

// Substream tags; simulators driven with the same tag share their Brownian
// increments (common random numbers).
inline constexpr std::uint32_t kTagTamedEm = 1;
inline constexpr std::uint32_t kTagReciprocal = 2;
inline constexpr std::uint32_t kTagSqBessel = 3;
inline constexpr std::uint32_t kTagSquaredGaussian = 4;

struct SdeConfig {
  double dt = 1e-3;  // default honors the dt <= 0.01 contract
  std::int64_t n_paths = 10000;
  std::uint64_t seed = 0;
  double lambda = 1.0;            // time rescale tau = lambda * t, applied by callers
  double blowup_threshold = 1e6;  // >= 1e3
  int n_threads = 1;
  bool zero_noise_hook = false;  // test hook: all Brownian increments forced to 0

  void validate() const;
};

// Planar ensemble of sample-path endpoints; flagged paths stay stored but
// are excluded from every estimator.
struct ComplexEnsemble {
  Eigen::VectorXcd points;
  std::vector<std::uint8_t> alive;
  double time = 0.0;
  std::uint64_t seed = 0;

  std::int64_t alive_count() const;
  std::int64_t flagged_count() const { return static_cast<std::int64_t>(points.size()) - alive_count(); }
};

struct RealEnsemble {
  Eigen::VectorXd values;
  double time = 0.0;
  std::uint64_t seed = 0;
};

// Snapshots of one simulation over a common path set.
struct EnsembleSeries {
  std::vector<ComplexEnsemble> snapshots;
};

// Optional per-path modulus statistics collected while stepping, so long
// runs need not store dense trajectories.
struct ModulusMonitor {
  double window_begin = 0.0;
  double window_end = 0.0;
  Eigen::VectorXd window_min;  // per path, min |phi| over [window_begin, window_end]
  Eigen::VectorXd global_min;  // per path, min |phi| over the whole run
};

using StartSampler = std::function<std::complex<double>(RngStream&)>;
StartSampler constant_start(std::complex<double> phi0);

// Euler-Maruyama for the planar system with the superlinear drift damped by
// 1/(1 + dt |phi|^2). Paths crossing blowup_threshold are flagged in place.
EnsembleSeries simulate_tamed_em(const StartSampler& start, const SdeConfig& cfg,
                                 std::span<const double> snapshot_times,
                                 ModulusMonitor* monitor = nullptr,
                                 std::uint32_t stream_tag = kTagTamedEm);
ComplexEnsemble simulate_tamed_em(const StartSampler& start, const SdeConfig& cfg,
                                  double t_end);

// Exact solve through the reciprocal: xi = 1/phi obeys a linear equation
// whose variation-of-constants integral is evaluated by trapezoid on the
// Brownian grid; the only discretization error is that quadrature. Paths
// with |xi| < 1e-12 are flagged (phi blow-up).
EnsembleSeries simulate_reciprocal_exact(std::complex<double> phi0, const SdeConfig& cfg,
                                         std::span<const double> snapshot_times,
                                         ModulusMonitor* monitor = nullptr,
                                         std::uint32_t stream_tag = kTagReciprocal);
ComplexEnsemble simulate_reciprocal_exact(std::complex<double> phi0, const SdeConfig& cfg,
                                          double t_end);

// Pathwise modulus sandwich anchored at modulus m = mod_star after elapsed
// time delta_t, plus the guaranteed blow-up-free horizon 2 log(1 + 1/(2m)).
struct ModulusBounds {
  double lower = 0.0;
  double upper = 0.0;  // +inf past the pole of the upper bound
  double blowup_floor = 0.0;
};
ModulusBounds modulus_bounds(double mod_star, double delta_t);

struct PathBoundsReport {
  std::int64_t sandwich_violations = 0;
  std::int64_t persistence_violations = 0;  // |phi| >= 1/2 reached, later < 1/2 - tol
  std::int64_t paths_checked = 0;
  std::int64_t snapshots_checked = 0;
};

// Verifies every unflagged path against the sandwich (anchored at the first
// snapshot) and the one-half persistence barrier. Violations are data, not
// errors.
PathBoundsReport check_path_bounds(const EnsembleSeries& series, double tol);

struct MomentEstimate {
  int order = 0;
  std::complex<double> value;
  double stderr_re = 0.0;
  double stderr_im = 0.0;
  double stderr_max() const { return stderr_re > stderr_im ? stderr_re : stderr_im; }
};

// Sample means of phi^m, m = 0..m_max, over unflagged paths (pairwise
// summation, componentwise standard errors). Requires >= 100 unflagged paths.
std::vector<MomentEstimate> ensemble_complex_moments(const ComplexEnsemble& ens, int m_max);

// d phi = alpha dt + sqrt(2 alpha max(phi,0)) dW, Euler-Maruyama with full
// truncation at zero.
RealEnsemble simulate_sqbessel(double alpha, double phi0, const SdeConfig& cfg, double t_end);

// phi(t) = (sqrt(phi0) + sqrt(beta) W_t)^2: exact sampling, no stepping error.
RealEnsemble simulate_squared_gaussian(double beta, double phi0, const SdeConfig& cfg,
                                       double t_end);

// E[xi(t)] = 1 + (xi0 - 1) e^{-t} for the reciprocal process.
std::complex<double> expected_reciprocal(std::complex<double> xi0, double t);

struct MeanEstimate {
  double value = 0.0;
  double se = 0.0;
};
MeanEstimate ensemble_mean(const RealEnsemble& ens);
// E[e^{u phi}] with standard error.
MeanEstimate ensemble_mean_exp(const RealEnsemble& ens, double u);
struct ComplexMeanEstimate {
  std::complex<double> value;
  double stderr_re = 0.0;
  double stderr_im = 0.0;
};
// Mean of 1/phi over unflagged paths.
ComplexMeanEstimate ensemble_mean_reciprocal(const ComplexEnsemble& ens);

}  // namespace annih
