#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "annih/errors.hpp"
#include "annih/reaction.hpp"
#include "annih/rng.hpp"

using namespace annih;

namespace {

const ReactionSpec kAnnihilation{{{2, 0, 1.0}}};
const ReactionSpec kPureDeath{{{1, 0, 1.0}}};

CountDistribution random_distribution(int n_max, std::uint64_t seed) {
  RngStream rng(seed, 0);
  Eigen::VectorXd p(n_max + 1);
  for (int i = 0; i <= n_max; ++i) p[i] = rng.uniform01();
  p /= p.sum();
  CountDistribution d;
  d.probs = p;
  return d;
}

}  // namespace

TEST_CASE("spec validation rejects malformed channels") {
  CHECK_THROWS_AS(validate(ReactionSpec{}), std::invalid_argument);
  CHECK_THROWS_AS(validate(ReactionSpec{{{1, 1, 1.0}}}), std::invalid_argument);
  CHECK_THROWS_AS(validate(ReactionSpec{{{1, 0, 0.0}}}), std::invalid_argument);
  CHECK_THROWS_AS(validate(ReactionSpec{{{-1, 0, 1.0}}}), std::invalid_argument);
  CHECK_THROWS_AS(validate(ReactionSpec{{{2, 0, 1.0}, {2, 0, 2.0}}}), std::invalid_argument);
  CHECK_NOTHROW(validate(ReactionSpec{{{2, 0, 1.0}, {1, 0, 2.0}}}));
  CHECK(no_growth(kAnnihilation));
  CHECK_FALSE(no_growth(ReactionSpec{{{1, 0, 1.0}, {0, 1, 1.0}, {1, 2, 1.0}}}));
}

TEST_CASE("generator encodes the pair-annihilation coefficients exactly") {
  for (const double lambda : {1.0, 2.5}) {
    const RateGenerator gen = build_generator(ReactionSpec{{{2, 0, lambda}}}, 12);
    const Eigen::MatrixXd q = Eigen::MatrixXd(gen.q);
    for (int n = 0; n <= 10; ++n) {
      // Inflow from n+2 and outflow from n, integer arithmetic times lambda.
      CHECK(q(n, n + 2) == static_cast<double>((n + 2) * (n + 1) / 2) * lambda);
      CHECK(q(n, n) == -static_cast<double>(n * (n - 1) / 2) * lambda);
    }
    // Column sums (off-diagonal inflows plus outflow) cancel.
    for (int n = 0; n <= 12; ++n)
      CHECK(std::abs(q.col(n).sum() + gen.overflow_rate[n]) <= 1e-13);
  }
}

TEST_CASE("generator worked examples") {
  const RateGenerator pair = build_generator(ReactionSpec{{{2, 0, 0.7}}}, 6);
  CHECK(Eigen::MatrixXd(pair.q)(2, 4) == doctest::Approx(6 * 0.7).epsilon(1e-15));

  const RateGenerator death = build_generator(kPureDeath, 4);
  CHECK(Eigen::MatrixXd(death.q).col(0).cwiseAbs().sum() == 0.0);  // state 0 is quiet

  const RateGenerator partial = build_generator(ReactionSpec{{{2, 1, 1.5}}}, 5);
  CHECK(Eigen::MatrixXd(partial.q)(2, 3) == doctest::Approx(3 * 1.5).epsilon(1e-15));

  CHECK_THROWS_AS(build_generator(kAnnihilation, 1), InvalidTruncationError);
}

TEST_CASE("two-particle extinction follows the exponential oracle") {
  const RateGenerator gen = build_generator(kAnnihilation, 2);
  const CountDistribution p0 = deterministic_initial(2, 2);
  const double t = std::log(2.0);
  const CountDistribution pt = master_evolve(gen, p0, t, 1e-10);
  CHECK(pt.probs[0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(pt.probs[2] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(pt.probs[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(pt.time == doctest::Approx(t));
}

TEST_CASE("zero-time evolution is the identity") {
  const RateGenerator gen = build_generator(kAnnihilation, 5);
  const CountDistribution p0 = random_distribution(5, 3);
  const CountDistribution pt = master_evolve(gen, p0, 0.0, 1e-10);
  CHECK(pt.probs == p0.probs);
}

TEST_CASE("single-particle decay matches e^{-t}") {
  const RateGenerator gen = build_generator(kPureDeath, 1);
  const CountDistribution pt =
      master_evolve(gen, deterministic_initial(1, 1), 1.0, 1e-10);
  CHECK(pt.probs[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
}

TEST_CASE("probability and parity are conserved along master evolution") {
  const double tol = 1e-10;
  const RateGenerator gen = build_generator(kAnnihilation, 9);
  for (const std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const CountDistribution p0 = random_distribution(9, seed);
    for (const double t : {0.3, 1.7}) {
      const CountDistribution pt = master_evolve(gen, p0, t, tol);
      CHECK(std::abs(pt.probs.sum() - 1.0) <= 10 * tol * t);
      CHECK(std::abs(parity(pt) - parity(p0)) <= 10 * tol * t);
    }
  }
}

TEST_CASE("overflow past the truncation is tracked and reported") {
  const ReactionSpec birth{{{0, 1, 1.0}}};
  const RateGenerator gen = build_generator(birth, 3);
  CountDistribution p0 = deterministic_initial(0, 3);
  p0.tail_tol = 1e-9;
  try {
    master_evolve(gen, p0, 2.0, 1e-8);
    FAIL("expected TruncationOverflowError");
  } catch (const TruncationOverflowError& e) {
    CHECK(e.required_n_max > 3);
  }
  // With a permissive tail tolerance the leaked mass is retrievable instead.
  p0.tail_tol = 1.0;
  const CountDistribution pt = master_evolve(gen, p0, 2.0, 1e-8);
  CHECK(pt.overflow_mass > 0.1);
  CHECK(pt.probs.sum() + pt.overflow_mass == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("ssa matches closed forms on the worked examples") {
  const std::int64_t paths = 100000;
  {
    const CountDistribution emp =
        ssa_ensemble(kPureDeath, deterministic_initial(1, 1), std::log(2.0), paths, 11);
    CHECK(std::abs(emp.probs[1] - 0.5) <= 3 * emp.stderrs[1]);
    CHECK(emp.n_samples == paths);
  }
  {
    const CountDistribution emp =
        ssa_ensemble(kAnnihilation, deterministic_initial(2, 2), std::log(2.0), paths, 12);
    CHECK(std::abs(emp.probs[0] - 0.5) <= 3 * emp.stderrs[0]);
  }
  {
    // Absorbing vacuum: consuming channels leave an empty system alone.
    const CountDistribution emp =
        ssa_ensemble(kAnnihilation, deterministic_initial(0, 2), 1.0, 1000, 13);
    CHECK(emp.probs[0] == 1.0);
  }
}

TEST_CASE("ssa agrees with the master equation bin by bin") {
  struct Case {
    ReactionSpec spec;
    CountDistribution init;
    double t;
  };
  const std::vector<Case> cases = {
      {kAnnihilation, deterministic_initial(10, 10), 0.5},
      {kPureDeath, deterministic_initial(5, 5), 0.7},
      {ReactionSpec{{{1, 0, 1.0}, {0, 1, 1.0}, {1, 2, 1.0}}},
       truncated_poisson_initial(1.0, 30), 0.3},
  };
  std::uint64_t seed = 100;
  for (const auto& c : cases) {
    const std::int64_t paths = 100000;
    const CountDistribution emp = ssa_ensemble(c.spec, c.init, c.t, paths, seed++);
    const RateGenerator gen = build_generator(c.spec, emp.n_max());
    CountDistribution p0;
    p0.probs = Eigen::VectorXd::Zero(emp.n_max() + 1);
    p0.probs.head(c.init.probs.size()) = c.init.probs;
    p0.tail_tol = 1.0;
    const CountDistribution exact = master_evolve(gen, p0, c.t, 1e-10);
    for (int n = 0; n <= emp.n_max(); ++n) {
      // Bin sampling error, sized by the exact law when the empirical bin is
      // empty (its plug-in standard error degenerates to zero there).
      const double p_ref = std::max(emp.probs[n], exact.probs[n]);
      const double se =
          std::sqrt(p_ref * (1.0 - p_ref) / static_cast<double>(emp.n_samples));
      CHECK(std::abs(emp.probs[n] - exact.probs[n]) <= 4 * se + 1e-12);
    }
  }
}

TEST_CASE("ssa is bit-identical across repeat runs and worker counts") {
  const CountDistribution init = truncated_poisson_initial(1.0, 25);
  const ReactionSpec spec{{{2, 0, 1.0}}};
  const CountDistribution a = ssa_ensemble(spec, init, 0.8, 20000, 77, 1);
  const CountDistribution b = ssa_ensemble(spec, init, 0.8, 20000, 77, 1);
  const CountDistribution c = ssa_ensemble(spec, init, 0.8, 20000, 77, 4);
  CHECK(a.probs == b.probs);
  CHECK(a.probs == c.probs);
}

TEST_CASE("ssa event logs record the jump chain") {
  std::vector<SsaEventLog> logs;
  ssa_ensemble(kAnnihilation, deterministic_initial(6, 6), 5.0, 50, 5, 1, &logs);
  CHECK(logs.size() == 50);
  for (const auto& log : logs) {
    REQUIRE(!log.times.empty());
    CHECK(log.states.front() == 6);
    for (std::size_t i = 1; i < log.times.size(); ++i) {
      CHECK(log.times[i] > log.times[i - 1]);
      CHECK(log.states[i] == log.states[i - 1] - 2);
    }
  }
}

TEST_CASE("factorial moments of point masses and the truncated poisson") {
  CHECK(factorial_moments(deterministic_initial(3, 5), 2).values[2] == 6.0);
  CHECK(factorial_moments(deterministic_initial(2, 5), 3).values[3] == 0.0);

  const CountDistribution pois = truncated_poisson_initial(1.0, 25);
  // Independent oracle: direct summation of the renormalized weights.
  double w = std::exp(-1.0), norm = 0.0, m2 = 0.0;
  for (int n = 0; n <= 25; ++n) {
    norm += w;
    m2 += static_cast<double>(n) * (n - 1) * w;
    w /= (n + 1);
  }
  CHECK(factorial_moments(pois, 2).values[2] == doctest::Approx(m2 / norm).epsilon(1e-10));
  CHECK(factorial_moments(pois, 2).values[2] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(factorial_moments(pois, 0).values[0] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("parity worked examples") {
  CountDistribution d;
  d.probs = Eigen::Vector3d(0.25, 0.25, 0.5);
  CHECK(parity(d) == 0.5);
  CHECK(parity(deterministic_initial(5, 6)) == -1.0);
  CHECK(parity(deterministic_initial(0, 6)) == 1.0);
}

TEST_CASE("initial-law constructors") {
  const CountDistribution point = deterministic_initial(2, 10);
  CHECK(point.probs[2] == 1.0);
  CHECK(point.probs.sum() == 1.0);

  const CountDistribution pois = truncated_poisson_initial(1.0, 20);
  CHECK(pois.probs[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(pois.discarded_tail < 1e-15);
  for (int n = 0; n + 1 <= 20; ++n)
    CHECK(pois.probs[n + 1] == doctest::Approx(pois.probs[n] / (n + 1)).epsilon(1e-13));

  try {
    truncated_poisson_initial(5.0, 5, 1e-12);
    FAIL("expected TruncationOverflowError");
  } catch (const TruncationOverflowError& e) {
    CHECK(e.required_n_max > 5);
    CHECK_NOTHROW(truncated_poisson_initial(5.0, e.required_n_max, 1e-12));
  }
}

TEST_CASE("default truncation heuristic") {
  CHECK(default_n_max(kAnnihilation, 6.0, 6, 2.0) == 6);
  const ReactionSpec triplet{{{1, 0, 1.0}, {0, 1, 1.0}, {1, 2, 1.0}}};
  const int n = default_n_max(triplet, 1.0, 10, 0.3);
  CHECK(n > 13);   // holds the grown Poisson tail
  CHECK(n < 120);  // but stays desk-sized
}
