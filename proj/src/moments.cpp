#include "annih/moments.hpp"

#include <cmath>
#include <stdexcept>

#include "annih/genfunc.hpp"
#include "annih/ode.hpp"

namespace annih {

Eigen::VectorXd moment_rhs(const FactorialMoments& m) {
  const int size = static_cast<int>(m.values.size());
  Eigen::VectorXd d(size);
  for (int k = 0; k < size; ++k) {
    const double next = k + 1 < size ? m.values[k + 1] : 0.0;
    d[k] = -m.rate * (0.5 * k * (k - 1) * m.values[k] + k * next);
  }
  return d;
}

FactorialMoments solve_closed(const FactorialMoments& m0, double t) {
  if (t < 0) throw std::invalid_argument("solve_closed: t < 0");
  int top = m0.max_order();
  while (top > 0 && m0.values[top] == 0.0) --top;

  // Homogeneous decay rates a_m = m(m-1)/2; distinct for m >= 1, and the
  // m = 0 equation is empty, so backward substitution never hits resonance.
  Eigen::VectorXd a(top + 1);
  for (int k = 0; k <= top; ++k) a[k] = 0.5 * k * (k - 1);

  // coeff(m, k): weight of e^{-a_k lambda t} in M_m(t). The m = 0 equation
  // has no forcing (its coupling coefficient is m itself), so M_0 is flat;
  // that also sidesteps the shared zero rate a_0 = a_1.
  Eigen::MatrixXd coeff = Eigen::MatrixXd::Zero(top + 1, top + 1);
  coeff(top, top) = m0.values[top];
  for (int m = top - 1; m >= 0; --m) {
    double at_own_rate = m0.values[m];
    for (int k = m + 1; k <= top; ++k) {
      coeff(m, k) = m == 0 ? 0.0 : m * coeff(m + 1, k) / (a[k] - a[m]);
      at_own_rate -= coeff(m, k);
    }
    coeff(m, m) = at_own_rate;
  }

  FactorialMoments out = m0;
  out.time = m0.time + t;
  out.values.setZero();
  for (int m = 0; m <= top; ++m) {
    double v = 0.0;
    for (int k = top; k >= m; --k) v += coeff(m, k) * std::exp(-a[k] * m0.rate * t);
    out.values[m] = v;
  }
  return out;
}

TruncatedMomentSolve solve_truncated(const FactorialMoments& m0, int m_max, double t,
                                     double tol) {
  if (m_max < 2) throw std::invalid_argument("solve_truncated: m_max < 2");
  if (tol <= 0) throw std::invalid_argument("solve_truncated: tol <= 0");

  Eigen::VectorXd y = Eigen::VectorXd::Zero(m_max + 1);
  const int n_copy = std::min<int>(m_max + 1, static_cast<int>(m0.values.size()));
  y.head(n_copy) = m0.values.head(n_copy);

  const double lambda = m0.rate;
  auto rhs = [lambda, m_max](const Eigen::VectorXd& v, Eigen::VectorXd& d) {
    for (int k = 0; k <= m_max; ++k) {
      const double next = k + 1 <= m_max ? v[k + 1] : 0.0;  // closure
      d[k] = -lambda * (0.5 * k * (k - 1) * v[k] + k * next);
    }
  };

  OdeControl ctl;
  ctl.rtol = tol;
  ctl.atol = tol * 1e-4;
  TruncatedMomentSolve out;
  out.moments = m0;
  out.moments.values = t > 0 ? rk45_integrate(rhs, y, 0.0, t, ctl) : y;
  out.moments.time = m0.time + t;
  out.closure_diagnostic = std::abs(out.moments.values[m_max]);
  out.closure_warning = out.closure_diagnostic > tol;
  return out;
}

double mean_field(double phi0, double lambda, double t) {
  if (phi0 < 0) throw std::invalid_argument("mean_field: phi0 < 0");
  return phi0 / (1.0 + lambda * phi0 * t);
}

std::pair<double, double> ito_generator_coeffs(int m) {
  if (m < 0) throw std::invalid_argument("ito_generator_coeffs: m < 0");
  // Drift of f(phi) = phi^m under the generator: -phi^2 (f' + f''/2).
  // Assembled through polynomial arithmetic so the identity with the chain
  // moment system is checked between two independent routes.
  const Polynomial f = Polynomial::monomial(m);
  const Polynomial f1 = f.derivative();
  const Polynomial f2 = f.derivative(2);
  Eigen::VectorXd drift = Eigen::VectorXd::Zero(m + 2);
  for (int n = 0; n <= f1.degree(); ++n) {
    if (n + 2 < drift.size()) drift[n + 2] -= f1.coeffs[n];
  }
  for (int n = 0; n <= f2.degree(); ++n) {
    if (n + 2 < drift.size()) drift[n + 2] -= 0.5 * f2.coeffs[n];
  }
  const double c_same = m < drift.size() ? drift[m] : 0.0;
  const double c_next = m + 1 < drift.size() ? drift[m + 1] : 0.0;
  return {c_same, c_next};
}

FactorialMoments point_mass_moments(int n0, int m_max, double lambda) {
  if (n0 < 0) throw std::invalid_argument("point_mass_moments: n0 < 0");
  FactorialMoments m;
  m.rate = lambda;
  m.values = Eigen::VectorXd::Zero(m_max + 1);
  double v = 1.0;
  for (int k = 0; k <= m_max; ++k) {
    m.values[k] = v;
    v *= static_cast<double>(n0 - k);
    if (k >= n0) v = 0.0;
  }
  return m;
}

FactorialMoments poisson_moments(double mu, int m_max, double lambda) {
  if (mu < 0) throw std::invalid_argument("poisson_moments: mu < 0");
  FactorialMoments m;
  m.rate = lambda;
  m.values = Eigen::VectorXd::Zero(m_max + 1);
  double v = 1.0;
  for (int k = 0; k <= m_max; ++k) {
    m.values[k] = v;
    v *= mu;
  }
  return m;
}

}  // namespace annih
