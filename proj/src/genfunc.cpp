#include "annih/genfunc.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <stdexcept>

#include "annih/errors.hpp"
#include "annih/numeric.hpp"

namespace annih {

Polynomial Polynomial::monomial(int n) {
  Polynomial p;
  p.coeffs = Eigen::VectorXd::Zero(n + 1);
  p.coeffs[n] = 1.0;
  return p;
}

double Polynomial::operator()(double x) const {
  double v = 0.0;
  for (int n = static_cast<int>(coeffs.size()) - 1; n >= 0; --n) v = v * x + coeffs[n];
  return v;
}

Polynomial Polynomial::derivative(int order) const {
  Polynomial p = *this;
  for (int o = 0; o < order; ++o) {
    if (p.coeffs.size() <= 1) {
      p.coeffs = Eigen::VectorXd::Zero(1);
      continue;
    }
    Eigen::VectorXd d(p.coeffs.size() - 1);
    for (int n = 1; n < p.coeffs.size(); ++n) d[n - 1] = n * p.coeffs[n];
    p.coeffs = d;
  }
  return p;
}

Polynomial& Polynomial::trim(double eps) {
  int top = static_cast<int>(coeffs.size()) - 1;
  while (top > 0 && std::abs(coeffs[top]) <= eps) --top;
  coeffs.conservativeResize(top + 1);
  return *this;
}

Polynomial gf_from_distribution(const CountDistribution& dist) {
  Polynomial p;
  p.coeffs = dist.probs;
  return p;
}

double eval_gf(const Polynomial& p, double x) { return p(x); }

double closed_pure_death(const Polynomial& g0, double lambda, double t, double x) {
  if (!(lambda > 0)) throw std::invalid_argument("closed_pure_death: lambda must be positive");
  if (t < 0) throw std::invalid_argument("closed_pure_death: t < 0");
  return g0(1.0 + (x - 1.0) * std::exp(-lambda * t));
}

double closed_triplet_equal(const Polynomial& g0, double alpha, double t, double x) {
  if (!(alpha > 0)) throw std::invalid_argument("closed_triplet_equal: alpha must be positive");
  if (t < 0) throw std::invalid_argument("closed_triplet_equal: t < 0");
  const double denom = 1.0 - alpha * t * (x - 1.0);
  if (std::abs(denom) < 1e-14)
    throw DomainError("closed_triplet_equal: evaluation at the characteristic pole");
  return g0((x - alpha * t * (x - 1.0)) / denom) / denom;
}

double closed_triplet_two_beta(const Polynomial& g0, double beta, double t, double x) {
  if (!(beta > 0))
    throw std::invalid_argument("closed_triplet_two_beta: beta must be positive");
  if (t < 0) throw std::invalid_argument("closed_triplet_two_beta: t < 0");
  const double s = 1.0 - 2.0 * beta * t * (x - 1.0);
  if (s <= 0)
    throw DomainError("closed_triplet_two_beta: outside the real branch of the square root");
  return g0((x - 2.0 * beta * t * (x - 1.0)) / s) / std::sqrt(s);
}

namespace {

GFGrid grid_from_nodes(const Polynomial& g0, Eigen::VectorXd nodes) {
  GFGrid g;
  g.values.resize(nodes.size());
  for (int i = 0; i < nodes.size(); ++i) g.values[i] = g0(nodes[i]);
  g.nodes = std::move(nodes);
  return g;
}

void validate_grid(const GFGrid& g) {
  const int n = static_cast<int>(g.nodes.size());
  if (n < 3 || g.values.size() != n) throw std::invalid_argument("gf grid: malformed");
  if (g.nodes[0] != -1.0 || g.nodes[n - 1] != 1.0)
    throw std::invalid_argument("gf grid: endpoints must be exactly -1 and 1");
  for (int i = 1; i < n; ++i)
    if (!(g.nodes[i] > g.nodes[i - 1]))
      throw std::invalid_argument("gf grid: nodes must increase strictly");
}

}  // namespace

GFGrid uniform_gf_grid(const Polynomial& g0, int n_nodes) {
  if (n_nodes < 3) throw std::invalid_argument("uniform_gf_grid: need at least 3 nodes");
  Eigen::VectorXd nodes(n_nodes);
  for (int i = 0; i < n_nodes; ++i)
    nodes[i] = -1.0 + 2.0 * static_cast<double>(i) / (n_nodes - 1);
  nodes[0] = -1.0;
  nodes[n_nodes - 1] = 1.0;
  return grid_from_nodes(g0, std::move(nodes));
}

GFGrid chebyshev_gf_grid(const Polynomial& g0, int n_nodes) {
  if (n_nodes < 3) throw std::invalid_argument("chebyshev_gf_grid: need at least 3 nodes");
  Eigen::VectorXd nodes(n_nodes);
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < n_nodes; ++i) nodes[i] = -std::cos(pi * i / (n_nodes - 1));
  nodes[0] = -1.0;
  nodes[n_nodes - 1] = 1.0;
  return grid_from_nodes(g0, std::move(nodes));
}

GFGrid pde_solve_annihilation(const GFGrid& g0, double lambda, double t_end, double dt) {
  validate_grid(g0);
  if (!(dt > 0)) throw std::invalid_argument("pde_solve_annihilation: dt must be positive");
  if (t_end < 0) throw std::invalid_argument("pde_solve_annihilation: t_end < 0");
  const int n = static_cast<int>(g0.nodes.size());
  if (n - 2 < 64)
    throw std::invalid_argument("pde_solve_annihilation: need at least 64 interior nodes");
  if (t_end == 0.0) return g0;

  const long n_steps = static_cast<long>(std::ceil(t_end / dt - 1e-12));
  const double h = t_end / static_cast<double>(n_steps);

  // Interior-row operator A: (lambda/2)(1 - x^2) * second difference on the
  // (possibly nonuniform) grid. Endpoint rows stay empty — those values are
  // the conserved quantities and are reimposed verbatim after each solve.
  std::vector<Eigen::Triplet<double>> a_trips, m_trips;
  for (int i = 1; i + 1 < n; ++i) {
    const double hm = g0.nodes[i] - g0.nodes[i - 1];
    const double hp = g0.nodes[i + 1] - g0.nodes[i];
    const double kappa = 0.5 * lambda * (1.0 - g0.nodes[i] * g0.nodes[i]);
    const double cm = kappa * 2.0 / (hm * (hm + hp));
    const double cp = kappa * 2.0 / (hp * (hm + hp));
    a_trips.emplace_back(i, i - 1, cm);
    a_trips.emplace_back(i, i, -(cm + cp));
    a_trips.emplace_back(i, i + 1, cp);
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(a_trips.begin(), a_trips.end());

  // Crank-Nicolson: (I - h/2 A) G_new = (I + h/2 A) G_old.
  Eigen::SparseMatrix<double> identity(n, n);
  identity.setIdentity();
  Eigen::SparseMatrix<double> lhs = identity - (h / 2.0) * a;
  Eigen::SparseMatrix<double> rhs_m = identity + (h / 2.0) * a;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(lhs);
  if (lu.info() != Eigen::Success)
    throw StepSizeError("pde_solve_annihilation: factorization failed");

  const double cap = 10.0 * g0.values.cwiseAbs().maxCoeff();
  Eigen::VectorXd g = g0.values;
  for (long s = 0; s < n_steps; ++s) {
    g = lu.solve(rhs_m * g);
    g[0] = g0.values[0];
    g[n - 1] = g0.values[n - 1];
    if (g.cwiseAbs().maxCoeff() > cap)
      throw StepSizeError(
          "pde_solve_annihilation: solution grew past 10x the initial sup norm; reduce dt");
  }

  GFGrid out;
  out.nodes = g0.nodes;
  out.values = std::move(g);
  out.time = g0.time + t_end;
  return out;
}

double general_rhs_residual(const ReactionChannel& channel, const CountDistribution& dist) {
  ReactionSpec spec{{channel}};
  validate(spec);

  // Left side: dG/dt assembled from the generator applied to the raw
  // distribution; the truncation is grown so no transition overflows.
  const int grow = std::max(0, channel.products - channel.reactants);
  const int n_ext = dist.n_max() + grow;
  const RateGenerator gen = build_generator(spec, n_ext);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n_ext + 1);
  p.head(dist.probs.size()) = dist.probs;
  Polynomial lhs;
  lhs.coeffs = gen.q * p;

  // Right side: (lambda/j!)(x^l - x^j) d^j/dx^j of the distribution
  // polynomial, exact coefficient arithmetic throughout.
  Polynomial gpoly = gf_from_distribution(dist);
  const Polynomial dj = gpoly.derivative(channel.reactants);
  double jfact = 1.0;
  for (int i = 2; i <= channel.reactants; ++i) jfact *= i;
  const double scale = channel.rate / jfact;
  Polynomial rhs;
  rhs.coeffs = Eigen::VectorXd::Zero(dj.degree() + std::max(channel.products, channel.reactants) + 1);
  for (int k = 0; k <= dj.degree(); ++k) {
    rhs.coeffs[k + channel.products] += scale * dj.coeffs[k];
    rhs.coeffs[k + channel.reactants] -= scale * dj.coeffs[k];
  }

  double max_resid = 0.0;
  const int n_samples = 41;
  for (int i = 1; i <= n_samples; ++i) {
    const double x = -1.0 + 2.0 * i / (n_samples + 1);
    max_resid = std::max(max_resid, std::abs(lhs(x) - rhs(x)));
  }
  return max_resid;
}

}  // namespace annih
