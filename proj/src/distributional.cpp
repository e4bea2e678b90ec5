#include "annih/distributional.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "annih/errors.hpp"
#include "annih/numeric.hpp"

namespace annih {

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// binom(-n, m) = (-1)^m binom(n + m - 1, m) for n >= 1.
double binomial_negative(int n, int m) {
  const double b = binomial(n + m - 1, m);
  return (m % 2 == 0) ? b : -b;
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

DeltaComb comb_from_moments(const FactorialMoments& m) {
  DeltaComb comb;
  comb.time = m.time;
  comb.coeffs.resize(m.values.size());
  double fact = 1.0;
  for (int n = 0; n < m.values.size(); ++n) {
    if (n > 1) fact *= n;
    comb.coeffs[n] = (n % 2 == 0 ? 1.0 : -1.0) * m.values[n] / fact;
  }
  return comb;
}

DeltaComb exact_amplitude_comb(int pair_count, double lambda, double t) {
  if (pair_count < 1) throw std::invalid_argument("exact_amplitude_comb: pair_count < 1");
  if (t < 0) throw std::invalid_argument("exact_amplitude_comb: t < 0");
  const int k0 = pair_count;
  DeltaComb comb;
  comb.time = t;
  comb.coeffs = Eigen::VectorXd::Zero(2 * k0 + 1);
  comb.coeffs[0] = 1.0;
  for (int k = 1; k <= k0; ++k) {
    const double amp = factorial(2 * k0) * factorial(k0 + k) * std::pow(2.0, 2 * k) /
                       (factorial(2 * k0 + 2 * k) * factorial(k0 - k));
    const double decay = std::exp(-static_cast<double>(k) * (2 * k - 1) * lambda * t);
    double half = 1.0;  // 2^{-j}
    for (int j = 0; j <= 2 * k; ++j) {
      double bracket = binomial(2 * k, j) * binomial_negative(2 * k + 1, j);
      if (j <= 2 * k - 2) bracket -= binomial(2 * k - 2, j) * binomial_negative(2 * k - 1, j);
      comb.coeffs[j] += amp * decay * half * bracket;
      half *= 0.5;
    }
  }
  return comb;
}

double pair_exponential(const DeltaComb& comb, double x) {
  const double u = 1.0 - x;  // (-1)^n (x-1)^n
  double v = 0.0;
  for (int n = static_cast<int>(comb.coeffs.size()) - 1; n >= 0; --n)
    v = v * u + comb.coeffs[n];
  return v;
}

double pair_polynomial(const DeltaComb& comb, const Polynomial& p) {
  double v = 0.0;
  double fact = 1.0;
  const int top = std::min<int>(static_cast<int>(comb.coeffs.size()),
                                static_cast<int>(p.coeffs.size()));
  for (int n = 0; n < top; ++n) {
    if (n > 1) fact *= n;
    v += comb.coeffs[n] * (n % 2 == 0 ? 1.0 : -1.0) * fact * p.coeffs[n];
  }
  return v;
}

LaurentRep laurent_from_moments(const FactorialMoments& m) {
  return LaurentRep{m.values};
}

LaurentValue laurent_eval(const LaurentRep& rep, std::complex<double> phi, double radius) {
  if (!(radius > 0)) throw std::invalid_argument("laurent_eval: radius must be positive");
  const double mod = std::abs(phi);
  if (!(mod > radius))
    throw DomainError("laurent_eval: |phi| must exceed the convergence radius");

  const std::complex<double> w = 1.0 / phi;
  std::complex<double> s = 0.0;
  for (int n = rep.n_terms() - 1; n >= 0; --n) s = (s + rep.moments[n]) * w;
  LaurentValue out;
  out.value = -s / std::complex<double>(0.0, kTwoPi);

  const double r = mod / radius;
  const double max_m = rep.moments.cwiseAbs().maxCoeff();
  out.remainder_bound = max_m * std::pow(r, -(rep.n_terms())) / (1.0 - 1.0 / r);
  return out;
}

CauchyFunction cauchy_function(const DeltaComb& comb) {
  // F(phi) = sum_n c_n (1/2 pi i) (-1)^{n+1} n! / phi^{n+1}
  std::vector<double> d(comb.coeffs.size());
  double fact = 1.0;
  for (std::size_t n = 0; n < d.size(); ++n) {
    if (n > 1) fact *= static_cast<double>(n);
    d[n] = comb.coeffs[static_cast<int>(n)] * (n % 2 == 0 ? -1.0 : 1.0) * fact;
  }
  return [d](std::complex<double> phi) {
    const std::complex<double> w = 1.0 / phi;
    std::complex<double> s = 0.0;
    for (int n = static_cast<int>(d.size()) - 1; n >= 0; --n) s = (s + d[n]) * w;
    return s * std::complex<double>(0.0, -1.0 / kTwoPi);
  };
}

namespace {

double simpson(const std::function<double(double)>& f, double lo, double hi,
               std::int64_t n_intervals) {
  const double h = (hi - lo) / static_cast<double>(n_intervals);
  double acc = f(lo) + f(hi);
  for (std::int64_t i = 1; i < n_intervals; ++i)
    acc += f(lo + h * static_cast<double>(i)) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

double boundary_jump_pair(const CauchyFunction& f_a, const Polynomial& f, double eps,
                          double range_lo, double range_hi, double range_tol) {
  if (!(eps > 0)) throw std::invalid_argument("boundary_jump_pair: eps must be positive");
  if (!(range_hi > range_lo))
    throw std::invalid_argument("boundary_jump_pair: empty quadrature range");

  auto integrand = [&](double s) {
    const std::complex<double> jump =
        f_a({s, eps}) - f_a({s, -eps});
    return (jump * f(s)).real();
  };

  // Node spacing fine enough to resolve the eps-wide kernels.
  std::int64_t n_intervals =
      static_cast<std::int64_t>(std::ceil((range_hi - range_lo) / (eps / 8.0)));
  n_intervals = std::clamp<std::int64_t>(n_intervals, 2048, 4'000'000);
  if (n_intervals % 2 == 1) ++n_intervals;

  if (std::isfinite(range_tol)) {
    const double width = range_hi - range_lo;
    const double above = std::abs(simpson(integrand, range_hi, range_hi + width, 2048));
    const double below = std::abs(simpson(integrand, range_lo - width, range_lo, 2048));
    if (above + below > range_tol)
      throw RangeError("boundary_jump_pair: estimated mass beyond the quadrature range (" +
                       std::to_string(above + below) + ") exceeds the requested tolerance");
  }
  return simpson(integrand, range_lo, range_hi, n_intervals);
}

double boundary_jump_pair(const DeltaComb& comb, const Polynomial& f, double eps,
                          double range_lo, double range_hi, double range_tol) {
  return boundary_jump_pair(cauchy_function(comb), f, eps, range_lo, range_hi, range_tol);
}

McCauchyEstimate mc_cauchy(const ComplexEnsemble& ens, std::complex<double> phi) {
  const std::int64_t alive = ens.alive_count();
  if (alive < 100)
    throw InsufficientEnsembleError("mc_cauchy: fewer than 100 unflagged points");
  double max_mod = 0.0;
  for (std::int64_t p = 0; p < ens.points.size(); ++p)
    if (ens.alive[p]) max_mod = std::max(max_mod, std::abs(ens.points[p]));
  if (!(std::abs(phi) > 1.1 * max_mod))
    throw ProximityError("mc_cauchy: phi is within 10% of the ensemble's modulus hull (" +
                         std::to_string(max_mod) + ")");

  std::vector<double> re, im;
  re.reserve(alive);
  im.reserve(alive);
  const std::complex<double> prefactor{0.0, -1.0 / kTwoPi};  // 1/(2 pi i)
  for (std::int64_t p = 0; p < ens.points.size(); ++p) {
    if (!ens.alive[p]) continue;
    const std::complex<double> v = prefactor / (ens.points[p] - phi);
    re.push_back(v.real());
    im.push_back(v.imag());
  }
  const double n = static_cast<double>(alive);
  McCauchyEstimate est;
  const double mean_re = pairwise_sum(std::span<const double>(re)) / n;
  const double mean_im = pairwise_sum(std::span<const double>(im)) / n;
  est.value = {mean_re, mean_im};
  if (alive > 1) {
    std::vector<double> sq(re.size());
    for (std::size_t i = 0; i < re.size(); ++i) sq[i] = (re[i] - mean_re) * (re[i] - mean_re);
    est.stderr_re = std::sqrt(pairwise_sum(std::span<const double>(sq)) / (n * (n - 1.0)));
    for (std::size_t i = 0; i < im.size(); ++i) sq[i] = (im[i] - mean_im) * (im[i] - mean_im);
    est.stderr_im = std::sqrt(pairwise_sum(std::span<const double>(sq)) / (n * (n - 1.0)));
  }
  return est;
}

GridDensity make_grid_density(const std::function<double(double)>& f, double phi_max,
                              int n_nodes) {
  if (!(phi_max > 0)) throw std::invalid_argument("make_grid_density: phi_max must be positive");
  if (n_nodes < 3 || n_nodes % 2 == 0)
    throw std::invalid_argument("make_grid_density: node count must be odd and >= 3");
  GridDensity d;
  d.nodes.resize(n_nodes);
  d.values.resize(n_nodes);
  d.weights.resize(n_nodes);
  const double h = phi_max / (n_nodes - 1);
  for (int i = 0; i < n_nodes; ++i) {
    d.nodes[i] = h * i;
    d.values[i] = f(d.nodes[i]);
    if (d.values[i] < 0)
      throw std::invalid_argument("make_grid_density: density must be nonnegative");
    d.weights[i] = (i == 0 || i == n_nodes - 1) ? h / 3.0 : (i % 2 == 1 ? 4.0 : 2.0) * h / 3.0;
  }
  return d;
}

PoissonTransformResult poisson_transform(const GridDensity& density, int n_max) {
  const int n_nodes = static_cast<int>(density.nodes.size());
  if (n_nodes < 3 || density.values.size() != n_nodes || density.weights.size() != n_nodes)
    throw std::invalid_argument("poisson_transform: malformed grid density");
  if (n_max < 0) throw std::invalid_argument("poisson_transform: n_max < 0");
  for (int i = 0; i < n_nodes; ++i)
    if (density.values[i] < 0)
      throw std::invalid_argument("poisson_transform: density must be nonnegative");

  double h_max = 0.0;
  for (int i = 1; i < n_nodes; ++i) h_max = std::max(h_max, density.nodes[i] - density.nodes[i - 1]);
  // The kernel phi^n e^{-phi} has width ~ sqrt(n); demand a few nodes per width.
  if (h_max > 0.25 * std::sqrt(static_cast<double>(n_max) + 1.0))
    throw ResolutionError("poisson_transform: grid spacing too coarse for the requested n_max");

  Eigen::VectorXd p = Eigen::VectorXd::Zero(n_max + 1);
  double input_l1 = 0.0;
  for (int i = 0; i < n_nodes; ++i) {
    const double mass = density.weights[i] * density.values[i];
    input_l1 += density.weights[i] * std::abs(density.values[i]);
    if (mass == 0.0) continue;
    const double phi = density.nodes[i];
    double kernel = std::exp(-phi);  // e^{-phi} phi^n / n!, advanced in n
    for (int n = 0; n <= n_max; ++n) {
      p[n] += mass * kernel;
      kernel *= phi / (n + 1);
    }
  }

  PoissonTransformResult out;
  out.dist.probs = p;
  out.dist.sum_tol = std::numeric_limits<double>::infinity();
  out.dist.tail_tol = 1.0;
  out.output_l1 = p.cwiseAbs().sum();
  out.input_l1 = input_l1;
  return out;
}

}  // namespace annih
