#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "annih/distributional.hpp"
#include "annih/errors.hpp"
#include "annih/rng.hpp"

using namespace annih;
using cplx = std::complex<double>;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

FactorialMoments two_particle_moments(double lambda, double t) {
  return solve_closed(point_mass_moments(2, 4, lambda), t);
}

double taylor_at_one(const FactorialMoments& m, double x) {
  // sum_k M_k / k! (x-1)^k, the Taylor series of G at x = 1.
  double fact = 1.0, pw = 1.0, acc = 0.0;
  for (int k = 0; k < m.values.size(); ++k) {
    if (k > 1) fact *= k;
    acc += m.values[k] / fact * pw;
    pw *= (x - 1.0);
  }
  return acc;
}

}  // namespace

TEST_CASE("comb coefficients from moments") {
  FactorialMoments vacuum;
  vacuum.values = Eigen::Vector3d(1.0, 0.0, 0.0);
  const DeltaComb comb = comb_from_moments(vacuum);
  CHECK(comb.coeffs[0] == 1.0);
  CHECK(comb.coeffs[1] == 0.0);
  CHECK(comb.coeffs[2] == 0.0);

  const double lambda = 1.0, t = 0.3;
  const DeltaComb pair = comb_from_moments(two_particle_moments(lambda, t));
  const double decay = std::exp(-lambda * t);
  CHECK(pair.coeffs[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(pair.coeffs[1] == doctest::Approx(-2.0 * decay).epsilon(1e-13));
  CHECK(pair.coeffs[2] == doctest::Approx(decay).epsilon(1e-13));

  Polynomial one;
  one.coeffs = Eigen::VectorXd::Ones(1);
  CHECK(pair_polynomial(pair, one) == pair.coeffs[0]);
}

TEST_CASE("closed-form amplitude comb for even starts") {
  const double lambda = 1.4, t = 0.25;
  const DeltaComb comb = exact_amplitude_comb(1, lambda, t);
  const double decay = std::exp(-lambda * t);
  CHECK(comb.coeffs[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(comb.coeffs[1] == doctest::Approx(-2.0 * decay).epsilon(1e-13));
  CHECK(comb.coeffs[2] == doctest::Approx(decay).epsilon(1e-13));

  // At t = 0 the pairing against e^{phi(x-1)} must hand back x^2.
  const DeltaComb comb0 = exact_amplitude_comb(1, lambda, 0.0);
  for (const double x : {-1.0, -0.4, 0.0, 0.7, 1.0})
    CHECK(pair_exponential(comb0, x) == doctest::Approx(x * x).epsilon(1e-12));

  // Long times kill every decaying group.
  const DeltaComb late = exact_amplitude_comb(3, 1.0, 60.0);
  CHECK(late.coeffs[0] == doctest::Approx(1.0).epsilon(1e-14));
  for (int n = 1; n < late.coeffs.size(); ++n) CHECK(std::abs(late.coeffs[n]) < 1e-12);
}

TEST_CASE("amplitude comb equals the moment route for one to three pairs") {
  const double lambda = 1.0;
  for (const int k0 : {1, 2, 3}) {
    for (const double t : {0.1, 0.5, 1.3}) {
      const DeltaComb direct = exact_amplitude_comb(k0, lambda, t);
      const FactorialMoments m =
          solve_closed(point_mass_moments(2 * k0, 2 * k0, lambda), t);
      const DeltaComb via_moments = comb_from_moments(m);
      REQUIRE(direct.coeffs.size() == via_moments.coeffs.size());
      for (int n = 0; n < direct.coeffs.size(); ++n)
        CHECK(direct.coeffs[n] == doctest::Approx(via_moments.coeffs[n]).epsilon(1e-10));
    }
  }
}

TEST_CASE("exponential pairing recovers the generating function") {
  const double lambda = 1.0, t = 0.45;
  const DeltaComb comb = exact_amplitude_comb(1, lambda, t);
  const double decay = std::exp(-lambda * t);
  for (const double x : {-1.0, -0.2, 0.5, 1.0})
    CHECK(pair_exponential(comb, x) == doctest::Approx(1.0 + decay * (x * x - 1.0)).epsilon(1e-13));
  // Probability of the two-particle state via the pairing route.
  CHECK(1.0 - pair_exponential(comb, 0.0) == doctest::Approx(decay).epsilon(1e-13));
  CHECK(pair_exponential(comb, 1.0) == comb.coeffs[0]);

  DeltaComb vacuum;
  vacuum.coeffs = Eigen::VectorXd::Ones(1);
  for (const double x : {-1.0, 0.0, 1.0}) CHECK(pair_exponential(vacuum, x) == 1.0);
}

TEST_CASE("polynomial pairing") {
  DeltaComb second;
  second.coeffs = Eigen::Vector3d(0.0, 0.0, 1.0);
  CHECK(pair_polynomial(second, Polynomial::monomial(2)) == 2.0);

  const double t = 0.6;
  const DeltaComb pair = comb_from_moments(two_particle_moments(1.0, t));
  CHECK(pair_polynomial(pair, Polynomial::monomial(2)) ==
        doctest::Approx(2.0 * std::exp(-t)).epsilon(1e-13));
}

TEST_CASE("pairing identities over random finite moment vectors") {
  RngStream rng(2024, 0);
  for (int rep = 0; rep < 40; ++rep) {
    const int len = 2 + static_cast<int>(rng.uniform01() * 7);
    FactorialMoments m;
    m.values.resize(len);
    for (int k = 0; k < len; ++k) m.values[k] = 4.0 * rng.uniform01() - 2.0;
    const DeltaComb comb = comb_from_moments(m);
    // Taylor identity at sampled x, and exact moment recovery.
    for (const double x : {-1.0, -0.37, 0.21, 0.88, 1.0}) {
      CHECK(pair_exponential(comb, x) ==
            doctest::Approx(taylor_at_one(m, x)).epsilon(1e-12));
    }
    for (int k = 0; k < len; ++k) {
      CHECK(pair_polynomial(comb, Polynomial::monomial(k)) ==
            doctest::Approx(m.values[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("negative-power expansion of the analytic representation") {
  FactorialMoments vacuum;
  vacuum.values = Eigen::VectorXd::Zero(5);
  vacuum.values[0] = 1.0;
  const LaurentRep rep = laurent_from_moments(vacuum);
  const cplx phi{0.3, 1.1};
  const LaurentValue v = laurent_eval(rep, phi, 1.0);
  const cplx expect = -1.0 / (cplx{0.0, kTwoPi} * phi);
  CHECK(std::abs(v.value - expect) < 1e-14);

  // Point mass at s = 1: the series resums the direct transform.
  FactorialMoments point;
  point.values = Eigen::VectorXd::Ones(61);
  const LaurentValue g = laurent_eval(laurent_from_moments(point), {2.0, 0.0}, 1.0);
  const cplx direct = (1.0 / (cplx{0.0, kTwoPi})) * (1.0 / (1.0 - 2.0));
  CHECK(std::abs(g.value - direct) <= g.remainder_bound + 1e-14);
  CHECK(std::abs(g.value - direct) < 1e-14);

  // Linearity in the moments.
  FactorialMoments scaled = point;
  scaled.values *= 3.0;
  const LaurentValue g3 = laurent_eval(laurent_from_moments(scaled), {2.0, 0.0}, 1.0);
  CHECK(std::abs(g3.value - 3.0 * g.value) < 1e-14);

  CHECK_THROWS_AS(laurent_eval(rep, {0.5, 0.0}, 1.0), DomainError);
}

TEST_CASE("laurent route equals the exact comb transform") {
  const DeltaComb comb = exact_amplitude_comb(2, 1.0, 0.4);
  FactorialMoments m;
  m.values.resize(comb.coeffs.size());
  for (int k = 0; k < m.values.size(); ++k)
    m.values[k] = pair_polynomial(comb, Polynomial::monomial(k));
  const CauchyFunction f = cauchy_function(comb);
  for (const cplx phi : {cplx{3.0, 0.5}, cplx{0.0, 2.0}, cplx{-4.0, 1.0}}) {
    const LaurentValue v = laurent_eval(laurent_from_moments(m), phi, 1.5);
    CHECK(std::abs(v.value - f(phi)) < 1e-13);
  }
}

TEST_CASE("boundary jump recovers pairings as eps shrinks") {
  DeltaComb vacuum;
  vacuum.coeffs = Eigen::VectorXd::Ones(1);
  Polynomial one;
  one.coeffs = Eigen::VectorXd::Ones(1);
  const double mass = boundary_jump_pair(vacuum, one, 1e-3, -1.0, 1.0);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-2));

  const double lambda = 1.0, t = 0.5;
  const DeltaComb comb = exact_amplitude_comb(1, lambda, t);
  const double target = 2.0 * std::exp(-lambda * t);
  double prev_err = 1.0;
  for (const double eps : {1e-2, 1e-3, 1e-4}) {
    const double got = boundary_jump_pair(comb, Polynomial::monomial(2), eps, -1.0, 1.0);
    const double rel = std::abs(got - target) / target;
    if (eps == 1e-3) CHECK(rel <= 1e-2);
    CHECK(rel < prev_err + 1e-12);
    prev_err = rel;
  }

  Polynomial zero;
  zero.coeffs = Eigen::VectorXd::Zero(1);
  CHECK(boundary_jump_pair(comb, zero, 1e-3, -1.0, 1.0) == 0.0);

  // Growing integrands leave detectable mass outside a too-small range.
  CHECK_THROWS_AS(
      boundary_jump_pair(comb, Polynomial::monomial(2), 1e-2, -0.05, 0.05, 1e-12),
      RangeError);
}

TEST_CASE("monte-carlo transform of point ensembles") {
  ComplexEnsemble ens;
  ens.points = Eigen::VectorXcd::Constant(128, cplx{1.0, 0.0});
  ens.alive.assign(128, 1);
  const cplx phi{0.0, 2.0};
  const McCauchyEstimate est = mc_cauchy(ens, phi);
  const cplx expect = (1.0 / cplx{0.0, kTwoPi}) / (cplx{1.0, 0.0} - phi);
  CHECK(std::abs(est.value - expect) < 1e-15);
  CHECK(est.stderr_re == 0.0);

  // Permutation of the points leaves the mean unchanged (to rounding).
  RngStream rng(5, 0);
  ComplexEnsemble spread;
  spread.points.resize(256);
  spread.alive.assign(256, 1);
  for (int i = 0; i < 256; ++i)
    spread.points[i] = cplx{rng.uniform01(), rng.uniform01() - 0.5};
  ComplexEnsemble reversed = spread;
  reversed.points.reverseInPlace();
  const McCauchyEstimate a = mc_cauchy(spread, {4.0, 0.0});
  const McCauchyEstimate b = mc_cauchy(reversed, {4.0, 0.0});
  CHECK(std::abs(a.value - b.value) < 1e-15);

  CHECK_THROWS_AS(mc_cauchy(spread, {1.05, 0.0}), ProximityError);
  ComplexEnsemble small;
  small.points = Eigen::VectorXcd::Constant(50, cplx{1.0, 0.0});
  small.alive.assign(50, 1);
  CHECK_THROWS_AS(mc_cauchy(small, {4.0, 0.0}), InsufficientEnsembleError);
}

TEST_CASE("monte-carlo transform equals the moment expansion on real ensembles") {
  RngStream rng(6, 0);
  ComplexEnsemble ens;
  ens.points.resize(200);
  ens.alive.assign(200, 1);
  for (int i = 0; i < 200; ++i) ens.points[i] = cplx{rng.uniform01(), 0.0};
  FactorialMoments m;
  m.values.resize(41);
  for (int k = 0; k <= 40; ++k) {
    double acc = 0.0;
    for (int i = 0; i < 200; ++i) acc += std::pow(ens.points[i].real(), k);
    m.values[k] = acc / 200.0;
  }
  const cplx phi{3.0, 0.0};
  const McCauchyEstimate direct = mc_cauchy(ens, phi);
  const LaurentValue series = laurent_eval(laurent_from_moments(m), phi, 1.0);
  CHECK(std::abs(direct.value - series.value) < 1e-13);
}

TEST_CASE("poisson kernel transform of densities") {
  // Exponential density: the integrals collapse to powers of one half.
  const GridDensity expdens =
      make_grid_density([](double x) { return std::exp(-x); }, 40.0, 4001);
  const PoissonTransformResult res = poisson_transform(expdens, 40);
  for (int n = 0; n <= 20; ++n)
    CHECK(res.dist.probs[n] == doctest::Approx(std::pow(2.0, -(n + 1))).epsilon(1e-6));
  CHECK(std::abs(res.output_l1 - res.input_l1) <= 1e-8);

  // A narrow unit-mass bump acts like a coherent state.
  const double mu = 3.0, width = 0.01;
  const GridDensity bump = make_grid_density(
      [mu, width](double x) {
        const double d = std::abs(x - mu);
        return d < width ? (width - d) / (width * width) : 0.0;
      },
      40.0, 32001);
  const PoissonTransformResult bres = poisson_transform(bump, 30);
  double w = std::exp(-mu);
  for (int n = 0; n <= 12; ++n) {
    CHECK(bres.dist.probs[n] == doctest::Approx(w).epsilon(2e-3));
    w *= mu / (n + 1);
  }

  CHECK_THROWS_AS(poisson_transform(make_grid_density([](double) { return 1.0; }, 40.0, 9), 100),
                  ResolutionError);
}

TEST_CASE("transform preserves total mass for random spline densities") {
  RngStream rng(7, 0);
  for (int rep = 0; rep < 20; ++rep) {
    // Piecewise-linear spline with nonnegative knot values; knots sit on
    // quadrature panel boundaries so the composite rule stays high order.
    std::array<double, 21> knots{};
    for (auto& k : knots) k = rng.uniform01() * 2.0;
    const auto spline = [&knots](double x) {
      const double pos = x / 2.0;  // knot spacing 2.0 over [0, 40]
      const int idx = std::min(19, static_cast<int>(pos));
      const double frac = pos - idx;
      return (1.0 - frac) * knots[idx] + frac * knots[idx + 1];
    };
    const GridDensity d = make_grid_density(spline, 40.0, 8001);
    const PoissonTransformResult res = poisson_transform(d, 100);
    CHECK(std::abs(res.output_l1 - res.input_l1) <= 1e-8);
  }
}
