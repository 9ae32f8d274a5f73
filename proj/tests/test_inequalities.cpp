#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "condind/construction.hpp"
#include "condind/inequalities.hpp"
#include "oracles.hpp"

using namespace cind;

namespace {

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::ParseError;
}

const Matrix kUniform = Matrix::Constant(2, 2, 0.25);

GammaCoupling row_gamma(int m, int n) {
  std::vector<int> v;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) v.push_back(i);
  return deterministic_gamma(m, n, v, m);
}

GammaCoupling random_gamma(std::mt19937_64& rng, int cells, int range) {
  std::uniform_real_distribution<double> u(0, 1);
  GammaCoupling g{range, Matrix(cells, range)};
  for (int c = 0; c < cells; ++c) {
    for (int r = 0; r < range; ++r) g.q(c, r) = u(rng);
    g.q.row(c) /= g.q.row(c).sum();
  }
  return g;
}

Matrix random_joint(std::mt19937_64& rng, int m, int n) {
  std::uniform_real_distribution<double> u(0, 1);
  Matrix p(m, n);
  for (int i = 0; i < m * n; ++i) p(i / n, i % n) = u(rng);
  return p / p.sum();
}

}  // namespace

TEST_CASE("theorem 1 checks") {
  const BoundVerdict u = check_theorem1(JointDistribution{kUniform}, row_gamma(2, 2), 0);
  CHECK(u.lhs == doctest::Approx(1.0));
  CHECK(u.rhs == doctest::Approx(1.0));
  CHECK(u.holds);
  CHECK(std::abs(u.slack) <= 1e-12);

  const BoundVerdict b = check_theorem1(d_epsilon(0), deterministic_gamma(2, 2, {0, 0, 1, 1}, 2), 5);
  CHECK(b.lhs == doctest::Approx(1.0));
  CHECK(b.rhs == doctest::Approx(0.0));
  CHECK_FALSE(b.holds);

  const BoundVerdict d = check_theorem1(d_epsilon(3.0 / 16), row_gamma(2, 2), 1);
  CHECK(d.rhs == doctest::Approx(2 * oracle::binary_entropy(3.0 / 8)).epsilon(1e-12));
  CHECK(d.rhs == doctest::Approx(1.908868).epsilon(1e-6));
  CHECK(d.holds);

  CHECK(code_of([] { check_theorem1(JointDistribution{kUniform}, row_gamma(3, 2), 0); }) == Errc::ShapeMismatch);
}

TEST_CASE("theorem 3 checks") {
  const Theorem3Verdict det = check_theorem3(d_epsilon(3.0 / 16), row_gamma(2, 2), 1);
  const BoundVerdict one = check_theorem1(d_epsilon(3.0 / 16), row_gamma(2, 2), 1);
  CHECK(det.entropyForm.rhs == doctest::Approx(one.rhs).epsilon(1e-12));
  CHECK(det.entropyForm.holds == one.holds);

  // gamma an independent fair coin.
  const GammaCoupling coin{2, Matrix::Constant(4, 2, 0.5)};
  const Theorem3Verdict c = check_theorem3(JointDistribution{kUniform}, coin, 0);
  CHECK(c.entropyForm.lhs == doctest::Approx(1.0));
  CHECK(c.entropyForm.rhs == doctest::Approx(1.0));
  CHECK(c.entropyForm.holds);

  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 2 + trial % 2, n = 2 + (trial / 2) % 2, k = trial % 4;
    const JointDistribution j{random_joint(rng, m, n)};
    const GammaCoupling g = random_gamma(rng, m * n, 3);
    const Theorem3Verdict t3 = check_theorem3(j, g, k);
    const BoundVerdict t1 = check_theorem1(j, g, k);
    CHECK(t3.entropyForm.rhs <= t1.rhs + 1e-10);
    CHECK(std::abs(t3.entropyForm.slack - t3.infoForm.slack) <= 1e-10);
    CHECK(t3.entropyForm.holds == t3.infoForm.holds);
    if (t3.entropyForm.holds) CHECK(t1.holds);
    // The well-known one-letter inequality H(g) <= H(g|a) + H(g|b) + I(a:b).
    const InfoReport r = info_report(couple_gamma(j, g));
    CHECK(r.at("H(g)") <= r.at("H(g|a)") + r.at("H(g|b)") + r.at("I(a:b)") + 1e-10);
  }
}

TEST_CASE("gamma_sweep") {
  const SweepResult d0 = gamma_sweep(d_epsilon(0), 10, 2);
  CHECK_FALSE(d0.verdict.holds);
  CHECK(std::isinf(d0.maxRatio));
  const SweepResult u = gamma_sweep(JointDistribution{kUniform}, 0, 4);
  CHECK(u.maxRatio <= 1 + 1e-9);
  CHECK(u.verdict.holds);
  CHECK(code_of([] { gamma_sweep(JointDistribution{Matrix::Constant(4, 4, 1.0 / 16)}, 1, 4); }) == Errc::TooLarge);

  const SweepResult t3 = gamma_sweep(d_epsilon(0), 3, 2, SweepBound::Theorem3);
  CHECK_FALSE(t3.verdict.holds);
}

TEST_CASE("block counterexample") {
  const BlockCounterexample c = block_counterexample(d_epsilon(0));
  CHECK(std::abs(c.report.at("H(g)") - 1) <= 1e-12);
  CHECK(c.report.at("H(g|a)") <= 1e-12);
  CHECK(c.report.at("H(g|b)") <= 1e-12);

  Matrix skew = Matrix::Zero(2, 2);
  skew(0, 0) = 0.9;
  skew(1, 1) = 0.1;
  const BlockCounterexample s = block_counterexample(JointDistribution{skew});
  CHECK(s.report.at("H(g)") == doctest::Approx(oracle::binary_entropy(0.9)).epsilon(1e-12));
  CHECK(s.report.at("H(g)") == doctest::Approx(0.469).epsilon(1e-3));
  CHECK(s.report.at("H(g|a)") <= 1e-12);
  CHECK(code_of([] { block_counterexample(JointDistribution{kUniform}); }) == Errc::NotBlock);
}

TEST_CASE("order lower bound") {
  CHECK(order_lower_bound(JointDistribution{kUniform}, 3) == 0.0);
  CHECK(std::isinf(order_lower_bound(d_epsilon(0), 2)));
  for (int n = 1; n <= 6; ++n) {
    const double e = oracle::eps_recursion(n);
    const double lb = order_lower_bound(d_epsilon(e), 2);
    CHECK(lb >= std::log2(1 / oracle::binary_entropy(2 * e)) - 1e-12);
    CHECK(lb <= n + 1e-9);
  }
}

TEST_CASE("rate bounds") {
  const RateVerdict r = rate_bound({1, 1, 1}, 1, 1, 1);
  CHECK(r.bound.rhs == 3.5);
  CHECK(r.bound.holds);
  CHECK(r.generic.rhs == 4.0);
  CHECK(rate_bound({1, 2, 3}, 0, 1, 1).bound.rhs == 6.0);
  CHECK_FALSE(rate_bound({1, 1, 1}, 1, 2, 2).bound.holds);
  CHECK(code_of([] { rate_bound({-1, 1, 1}, 1, 1, 1); }) == Errc::NegativeRate);

  // 2 - 2^-k grows with k, so the bound only loosens.
  double prev = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 10; ++k) {
    const double slack = rate_bound({0.7, 0.4, 0.9}, k, 1.5, 1.2).bound.slack;
    CHECK(slack >= prev);
    prev = slack;
  }

  CHECK(lemma12_bound(1, 0.1, 4) == doctest::Approx(2.2));
  CHECK(lemma12_bound(1, 0, 8) == doctest::Approx(2.0));
  CHECK(code_of([] { lemma12_bound(1, 0.5, 4); }) == Errc::EpsOutOfRange);
}

TEST_CASE("common information bound") {
  const DerivationWitness w = d_epsilon_chain(1);
  const GammaCoupling g = row_gamma(2, 2);
  const BoundVerdict one = common_information_bound(w, 1, g);
  const BoundVerdict t1 = check_theorem1(JointDistribution{w.base}, g, 1);
  CHECK(one.lhs == t1.lhs);
  CHECK(one.rhs == t1.rhs);

  std::vector<int> first;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) first.push_back(i / 2);
  CHECK(common_information_bound(w, 2, deterministic_gamma(4, 4, first, 2)).holds);
  CHECK(code_of([&] { common_information_bound(w, 40, g); }) == Errc::TooLarge);
}
