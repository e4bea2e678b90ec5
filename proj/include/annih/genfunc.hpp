#pragma once

#include <Eigen/Dense>

#include "annih/reaction.hpp"

namespace annih {

// Dense polynomial with real coefficients, index n = coefficient of x^n.
struct Polynomial {
  Eigen::VectorXd coeffs;

  static Polynomial monomial(int n);
  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  double operator()(double x) const;  // Horner
  Polynomial derivative(int order = 1) const;
  Polynomial& trim(double eps = 0.0);  // drop trailing ~zero coefficients
};

// Coefficient n equals P_n.
Polynomial gf_from_distribution(const CountDistribution& dist);

double eval_gf(const Polynomial& p, double x);

// Closed-form evolutions of the generating function for the solvable systems.
// Pure decay A -> 0 at rate lambda: G0(1 + (x-1) e^{-lambda t}).
double closed_pure_death(const Polynomial& g0, double lambda, double t, double x);
// Death/birth/branching with all three rates equal to alpha.
double closed_triplet_equal(const Polynomial& g0, double alpha, double t, double x);
// Same triplet with death = branching = 2*beta (square-root prefactor branch).
double closed_triplet_two_beta(const Polynomial& g0, double beta, double t, double x);

// Generating-function values on an x-grid over [-1, 1] at one time.
struct GFGrid {
  Eigen::VectorXd nodes;   // strictly increasing; nodes[0] = -1, last = +1
  Eigen::VectorXd values;
  double time = 0.0;
};

GFGrid uniform_gf_grid(const Polynomial& g0, int n_nodes);
// Nodes clustered toward the endpoints, where the operator degenerates.
GFGrid chebyshev_gf_grid(const Polynomial& g0, int n_nodes);

// Crank-Nicolson stepping of dG/dt = (lambda/2)(1-x^2) G_xx with the endpoint
// values held bit-exactly fixed (they are the conserved quantities; the
// degenerate coefficient vanishes there). Throws StepSizeError if the sup
// norm grows past 10x the initial one.
GFGrid pde_solve_annihilation(const GFGrid& g0, double lambda, double t_end, double dt);

// Max over an interior sample grid of | dG/dt(from the generator) -
// (lambda/j!)(x^l - x^j) d^j G/dx^j |, both sides assembled as exact
// polynomials of the distribution.
double general_rhs_residual(const ReactionChannel& channel, const CountDistribution& dist);

}  // namespace annih
