#pragma once

#include <Eigen/Dense>
#include <utility>

namespace annih {

// Factorial moments M_m = E[n(n-1)...(n-m+1)] of a particle count law,
// tagged with the pair-annihilation rate they evolve under.
struct FactorialMoments {
  Eigen::VectorXd values;  // M_0 .. M_max
  double rate = 1.0;       // lambda (1/time)
  double time = 0.0;

  int max_order() const { return static_cast<int>(values.size()) - 1; }
};

// dM_m/dt = -lambda [ m(m-1)/2 M_m + m M_{m+1} ]; entries past the stored
// range are treated as zero.
Eigen::VectorXd moment_rhs(const FactorialMoments& m);

// Exact solve for compactly supported data (M_m(0) = 0 beyond some N):
// backward substitution through the triangular system, each component a
// finite sum of exponentials. No time stepping involved.
FactorialMoments solve_closed(const FactorialMoments& m0, double t);

struct TruncatedMomentSolve {
  FactorialMoments moments;
  double closure_diagnostic = 0.0;  // |M_{m_max}(t)|, the quantity the closure zeroes next
  bool closure_warning = false;
};

// Adaptive integration of the system closed by M_{m_max+1} = 0.
TruncatedMomentSolve solve_truncated(const FactorialMoments& m0, int m_max, double t,
                                     double tol);

// phi0 / (1 + lambda phi0 t): the macroscopic density limit.
double mean_field(double phi0, double lambda, double t);

// Coefficients (c1, c2) with d/dt E[phi^m] = c1 E[phi^m] + c2 E[phi^{m+1}]
// for the complex pair-annihilation diffusion in rescaled time, read off the
// drift -phi^2 (f' + f''/2) applied to f = phi^m.
std::pair<double, double> ito_generator_coeffs(int m);

// Initial moment vectors.
FactorialMoments point_mass_moments(int n0, int m_max, double lambda);
FactorialMoments poisson_moments(double mu, int m_max, double lambda);

}  // namespace annih
