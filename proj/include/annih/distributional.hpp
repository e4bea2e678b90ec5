#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <limits>

#include "annih/genfunc.hpp"
#include "annih/moments.hpp"
#include "annih/reaction.hpp"
#include "annih/sde.hpp"

namespace annih {

// Finite linear combination sum_n c_n delta^(n) of Dirac-delta derivatives.
// Pairing convention, fixed module-wide: <delta^(n), f> = (-1)^n f^(n)(0).
struct DeltaComb {
  Eigen::VectorXd coeffs;  // c_0 .. c_K
  double time = 0.0;
};

// c_n = (-1)^n M_n / n!, the unique choice under which pairing against
// e^{phi(x-1)} reproduces G(x) = sum_m M_m/m! (x-1)^m.
DeltaComb comb_from_moments(const FactorialMoments& m);

// Closed-form amplitude comb for the pair-annihilation chain started with
// exactly 2*pair_count particles: delta_0 plus decaying groups of delta
// derivatives with rates k(2k-1)*lambda, k = 1..pair_count.
DeltaComb exact_amplitude_comb(int pair_count, double lambda, double t);

// <Psi, e^{phi(x-1)}> = sum_n c_n (1-x)^n.
double pair_exponential(const DeltaComb& comb, double x);

// <Psi, p> = sum_n c_n (-1)^n n! [s^n] p.
double pair_polynomial(const DeltaComb& comb, const Polynomial& p);

// Truncated negative-power expansion of the analytic representation,
// -(1/2 pi i) sum_{n<=N} M_n phi^{-(n+1)}.
struct LaurentRep {
  Eigen::VectorXd moments;  // M_0 .. M_N
  int n_terms() const { return static_cast<int>(moments.size()); }
};

LaurentRep laurent_from_moments(const FactorialMoments& m);

struct LaurentValue {
  std::complex<double> value;
  double remainder_bound = 0.0;  // geometric tail bound, reported always
};

// Valid only for |phi| strictly greater than the caller-supplied convergence
// radius; throws DomainError inside.
LaurentValue laurent_eval(const LaurentRep& rep, std::complex<double> phi, double radius);

using CauchyFunction = std::function<std::complex<double>(std::complex<double>)>;

// Exact analytic representation of a finite comb: holomorphic off the real
// line (here, off phi = 0), sum_n c_n (1/2 pi i)(-1)^{n+1} n! / phi^{n+1}.
CauchyFunction cauchy_function(const DeltaComb& comb);

// Integrates [F(s + i eps) - F(s - i eps)] f(s) over [range_lo, range_hi] by
// composite Simpson with nodes fine enough to resolve eps; converges to
// <Psi, f> as eps -> 0. If the estimated mass beyond the range exceeds
// range_tol, throws RangeError.
double boundary_jump_pair(const CauchyFunction& f_a, const Polynomial& f, double eps,
                          double range_lo, double range_hi,
                          double range_tol = std::numeric_limits<double>::infinity());
double boundary_jump_pair(const DeltaComb& comb, const Polynomial& f, double eps,
                          double range_lo, double range_hi,
                          double range_tol = std::numeric_limits<double>::infinity());

struct McCauchyEstimate {
  std::complex<double> value;
  double stderr_re = 0.0;
  double stderr_im = 0.0;
};

// (1/2 pi i) * mean over unflagged points of 1/(z - phi). Requires at least
// 100 unflagged points and |phi| at least 10% outside the ensemble's modulus
// hull.
McCauchyEstimate mc_cauchy(const ComplexEnsemble& ens, std::complex<double> phi);

// Nonnegative density sampled on a grid over [0, phi_max] with quadrature
// weights attached (composite Simpson for the uniform odd-count grids built
// by make_grid_density).
struct GridDensity {
  Eigen::VectorXd nodes;
  Eigen::VectorXd values;
  Eigen::VectorXd weights;
};

GridDensity make_grid_density(const std::function<double(double)>& f, double phi_max,
                              int n_nodes);

struct PoissonTransformResult {
  CountDistribution dist;
  double output_l1 = 0.0;  // sum_n |P_n|
  double input_l1 = 0.0;   // quadrature of |Psi|
};

// P_n = (1/n!) integral phi^n e^{-phi} Psi(phi) dphi for n <= n_max. Throws
// ResolutionError when the grid is too coarse to carry the n_max-th kernel.
PoissonTransformResult poisson_transform(const GridDensity& density, int n_max);

}  // namespace annih
