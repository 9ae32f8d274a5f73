#include <doctest.h>

#include <random>

#include "condind/construction.hpp"
#include "condind/inequalities.hpp"
#include "condind/witness.hpp"
#include "mutate.hpp"
#include "oracles.hpp"

using namespace cind;

namespace {

Matrix outer(const Vector& r, const Vector& c) { return r * c.transpose(); }

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::ParseError;
}

}  // namespace

TEST_CASE("validate_witness on trivial and chain witnesses") {
  const DerivationWitness w0{Matrix::Constant(2, 2, 0.25), {}, 1e-9};
  CHECK(validate_witness(w0).verdict);

  const DerivationWitness w2 = d_epsilon_chain(2);
  const ValidationReport rep = validate_witness(w2, 1e-10);
  CHECK(rep.verdict);
  for (const QuadJoint& s : w2.steps) {
    CHECK(oracle::step_cmi(s, 2) <= 1e-10);
    CHECK(oracle::step_cmi(s, 3) <= 1e-10);
  }
  for (std::size_t t = 0; t < rep.perStep.size(); ++t) {
    CHECK(rep.perStep[t].cmiA == doctest::Approx(oracle::step_cmi(w2.steps[t], 2)).epsilon(1e-9).scale(1));
    CHECK(rep.perStep[t].cmiB == doctest::Approx(oracle::step_cmi(w2.steps[t], 3)).epsilon(1e-9).scale(1));
  }

  // Perturbing one stored entry breaks either a conditional independence or a marginal.
  std::mt19937_64 rng(3);
  int flipped = 0;
  for (int k = 0; k < 20; ++k) flipped += !validate_witness(mutate_witness(w2, rng), 1e-10).verdict;
  CHECK(flipped >= 19);
}

TEST_CASE("validate_witness is monotone in tol") {
  DerivationWitness w = d_epsilon_chain(3);
  std::mt19937_64 rng(9);
  for (int k = 0; k < 10; ++k) {
    const DerivationWitness m = mutate_witness(w, rng, 1e-6);
    bool before = false;
    for (double tol : {1e-12, 1e-9, 1e-6, 1e-3, 1.0}) {
      const bool now = validate_witness(m, tol).verdict;
      if (before) CHECK(now);
      before = now;
    }
  }
}

TEST_CASE("validate_witness rejects mismatched shapes") {
  DerivationWitness w = d_epsilon_chain(1);
  w.base = Matrix::Constant(3, 3, 1.0 / 9);
  CHECK(code_of([&] { validate_witness(w); }) == Errc::ShapeMismatch);
}

TEST_CASE("independent_witness") {
  CHECK(independent_witness(JointDistribution{Matrix::Constant(2, 2, 0.25)}).order() == 0);
  const Matrix p = outer(Vector::Map(std::vector<double>{0.3, 0.7}.data(), 2), Vector::Constant(2, 0.5));
  CHECK(independent_witness(JointDistribution{p}).order() == 0);
  CHECK(code_of([] { independent_witness(d_epsilon(0)); }) == Errc::NotIndependent);
}

TEST_CASE("map_witness") {
  const DerivationWitness w = d_epsilon_chain(2);
  const DerivationWitness id = map_witness(w, {0, 1}, {0, 1});
  CHECK(id.base == w.base);
  REQUIRE(id.order() == w.order());
  CHECK(oracle::dense(id.steps[0]) == oracle::dense(w.steps[0]));

  const DerivationWitness w4 = product_witness(d_epsilon_chain(1), d_epsilon_chain(2));
  const DerivationWitness merged = map_witness(w4, {0, 1, 2, 3}, {0, 0, 1, 1});
  Matrix expect(4, 2);
  for (int i = 0; i < 4; ++i) {
    expect(i, 0) = w4.base(i, 0) + w4.base(i, 1);
    expect(i, 1) = w4.base(i, 2) + w4.base(i, 3);
  }
  CHECK(oracle::max_abs_diff(merged.base, expect) <= 1e-12);
  CHECK(validate_witness(merged).verdict);

  CHECK(code_of([&] { map_witness(w, {0}, {0, 1}); }) == Errc::BadMap);
  CHECK(code_of([&] { map_witness(w, {0, -1}, {0, 1}); }) == Errc::BadMap);
}

TEST_CASE("pad_witness") {
  const DerivationWitness w = d_epsilon_chain(1);
  CHECK(pad_witness(w, 1).order() == 1);
  const DerivationWitness u{Matrix::Constant(2, 2, 0.25), {}, 1e-9};
  const DerivationWitness p = pad_witness(u, 2);
  CHECK(p.order() == 2);
  CHECK(validate_witness(p).verdict);
  CHECK(code_of([&] { pad_witness(w, 0); }) == Errc::OrderDecrease);
}

TEST_CASE("product and power witnesses") {
  const DerivationWitness u{Matrix::Constant(2, 2, 0.25), {}, 1e-9};
  const DerivationWitness uu = product_witness(u, u);
  CHECK(uu.order() == 0);
  CHECK(oracle::max_abs_diff(uu.base, Matrix::Constant(4, 4, 1.0 / 16)) <= 1e-15);

  const DerivationWitness c1 = d_epsilon_chain(1);
  const DerivationWitness cu = product_witness(c1, u);
  CHECK(cu.order() == 1);
  CHECK(oracle::max_abs_diff(cu.base, kron(c1.base, u.base)) <= 1e-15);
  CHECK(validate_witness(cu).verdict);
  CHECK(product_witness(c1, d_epsilon_chain(3)).order() == 3);

  std::mt19937_64 rng(1);
  for (int n = 1; n <= 4; ++n) {
    const DerivationWitness a = d_epsilon_chain(n), b = d_epsilon_chain(5 - n);
    const double h = entropy(Joint::from_matrix(product_witness(a, b).base));
    CHECK(h == doctest::Approx(entropy(Joint::from_matrix(a.base)) + entropy(Joint::from_matrix(b.base))).epsilon(1e-10));
  }

  CHECK(power_witness(c1, 1).base == c1.base);
  const DerivationWitness sq = power_witness(c1, 2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(sq.base(i, j) == doctest::Approx(c1.base(i / 2, j / 2) * c1.base(i % 2, j % 2)));
  CHECK(validate_witness(sq).verdict);
  CHECK(code_of([&] { power_witness(c1, 0); }) == Errc::BadN);
}

TEST_CASE("transpose_witness") {
  const DerivationWitness w = product_witness(d_epsilon_chain(1), DerivationWitness{Matrix::Constant(1, 3, 1.0 / 3), {}, 1e-9});
  const DerivationWitness t = transpose_witness(w);
  CHECK(t.base == w.base.transpose());
  CHECK(validate_witness(t).verdict);
}

TEST_CASE("validated witnesses satisfy the order-k entropy bound for every small map") {
  for (int k = 0; k <= 3; ++k) {
    const DerivationWitness w = d_epsilon_chain(k);
    REQUIRE(validate_witness(w).verdict);
    for (int range = 2; range <= 3; ++range) {
      const SweepResult s = gamma_sweep(JointDistribution{w.base}, k, range);
      CHECK(s.verdict.holds);
    }
  }
}
