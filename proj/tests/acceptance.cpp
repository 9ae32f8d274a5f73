// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "condind/construction.hpp"
#include "condind/inequalities.hpp"
#include "corpus.hpp"
#include "mutate.hpp"
#include "oracles.hpp"

using namespace cind;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Matrix d_eps(double e) {
  Matrix d(2, 2);
  d << 0.5 - e, e, e, 0.5 - e;
  return d;
}

Outcome chain() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  double worstCmi = 0, worstMI = 0, worstBase = 0;
  for (int n = 0; n <= 6; ++n) {
    const DerivationWitness w = d_epsilon_chain(n);
    const ValidationReport r = validate_witness(w, 1e-10);
    o.pass &= r.verdict && w.order() == n;
    worstCmi = std::max(worstCmi, r.max_cmi());
    worstMI = std::max(worstMI, r.finalMI);
    worstBase = std::max(worstBase, oracle::max_abs_diff(w.base, d_eps(oracle::eps_recursion(n))));
  }
  const double s = seconds_since(t0);
  o.pass &= worstCmi <= 1e-10 && worstMI <= 1e-12 && worstBase <= 1e-12 && s < 1;
  o.detail = fmt("max step CMI %.3g, max final MI %.3g, base error %.3g, %.3f s", worstCmi, worstMI, worstBase, s);
  return o;
}

Outcome exhaustive_gamma() {
  const auto t0 = std::chrono::steady_clock::now();
  const DerivationWitness w = d_epsilon_chain(3);
  const JointDistribution j{w.base};
  Outcome o;
  o.pass = validate_witness(w).verdict;
  int ok1 = 0, ok3 = 0;
  double minSlack = 1e300;
  for (int code = 0; code < 256; ++code) {
    std::vector<int> map(4);
    for (int c = 0; c < 4; ++c) map[c] = (code >> (2 * c)) & 3;
    const GammaCoupling g = deterministic_gamma(2, 2, map, 4);
    const InfoReport rep = info_report(couple_gamma(j, g));
    // Bounds recomputed here from the reported entropies.
    const double rhs1 = 8 * (rep.at("H(g|a)") + rep.at("H(g|b)"));
    const double rhs3 = rhs1 - 15 * rep.at("H(g|ab)");
    const BoundVerdict v1 = check_theorem1(j, g, 3);
    const Theorem3Verdict v3 = check_theorem3(j, g, 3);
    ok1 += rep.at("H(g)") <= rhs1 + 1e-9 && v1.holds && std::abs(v1.rhs - rhs1) <= 1e-12;
    ok3 += rep.at("H(g)") <= rhs3 + 1e-9 && v3.entropyForm.holds && v3.infoForm.holds;
    minSlack = std::min(minSlack, rhs1 - rep.at("H(g)"));
  }
  const double s = seconds_since(t0);
  o.pass &= ok1 == 256 && ok3 == 256 && s < 1;
  o.detail = fmt("theorem 1 holds %d/256, theorem 3 holds %d/256, min slack %.6f, %.3f s", ok1, ok3, minSlack, s);
  return o;
}

Outcome block_oracle() {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  int disagreements = 0, blocks = 0;
  // The empty pattern carries no distribution: both sides must decline to split it.
  bool emptyRejected = false;
  try {
    block_split(Matrix::Zero(3, 3));
  } catch (const Error& e) {
    emptyRejected = e.code() == Errc::EmptySupport;
  }
  disagreements += !emptyRejected || oracle::is_block_bruteforce(Matrix::Zero(3, 3));
  for (unsigned mask = 1; mask < 512; ++mask) {
    Matrix p = Matrix::Zero(3, 3);
    for (int c = 0; c < 9; ++c)
      if ((mask >> c) & 1) p(c / 3, c % 3) = u(rng);
    p /= p.sum();
    const bool lib = static_cast<bool>(block_split(p));
    const bool ref = oracle::is_block_bruteforce(p);
    disagreements += lib != ref;
    blocks += ref;
  }
  return {disagreements == 0, fmt("512 patterns (empty one rejected as EmptySupport: %s), %d block by brute force, "
                                  "%d disagreements",
                                  emptyRejected ? "yes" : "no", blocks, disagreements)};
}

Outcome corollary() {
  const BlockCounterexample c = block_counterexample(d_epsilon(0));
  const double h = c.report.at("H(g)"), ha = c.report.at("H(g|a)"), hb = c.report.at("H(g|b)");
  bool allFail = true;
  for (int k = 0; k <= 20; ++k) allFail &= !check_theorem1(d_epsilon(0), c.gamma, k).holds;
  return {std::abs(h - 1) <= 1e-12 && ha <= 1e-12 && hb <= 1e-12 && allFail,
          fmt("H(g) = %.12f, H(g|a) = %.3g, H(g|b) = %.3g, theorem 1 fails for k = 0..20: %s", h, ha, hb,
              allFail ? "yes" : "no")};
}

Outcome lower_bound() {
  Outcome o;
  std::ostringstream d;
  for (int n = 1; n <= 6; ++n) {
    const double e = oracle::eps_recursion(n);
    const double expect = std::log2(1 / oracle::binary_entropy(2 * e));
    // gamma = a.
    std::vector<int> rows{0, 0, 1, 1};
    const InfoReport rep = info_report(couple_gamma(d_epsilon(e), deterministic_gamma(2, 2, rows, 2)));
    const double viaAlpha = std::log2(rep.at("H(g)") / (rep.at("H(g|a)") + rep.at("H(g|b)")));
    const double swept = order_lower_bound(d_epsilon(e), 2);
    o.pass &= std::abs(viaAlpha - expect) <= 1e-9 && swept >= expect - 1e-9 && expect <= n + 1e-9 && swept <= n + 1e-9;
    if (n == 5) o.pass &= std::abs(e - 0.09982) < 1e-5;
    d << (n > 1 ? ", " : "") << "n=" << n << ": " << fmt("%.6f", expect);
  }
  o.detail = d.str();
  return o;
}

Outcome solver() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(606);
  std::normal_distribution<double> g(0, 1);
  double worstRes = 0, worstRow = 0;
  int cases = 0;
  while (cases < 100) {
    const int n = 2 + cases % 5;
    Matrix M(n, n), R(n, n);
    for (int i = 0; i < n * n; ++i) {
      M(i / n, i % n) = g(rng);
      R(i / n, i % n) = g(rng);
    }
    Eigen::JacobiSVD<Matrix> svd(M);
    if (svd.singularValues()(0) / svd.singularValues()(n - 1) >= 1e3) continue;
    R.array() -= R.sum() / (n * n);
    const Correction c = solve_correction(M, R, -1);
    worstRes = std::max(worstRes, (R + c.P.transpose() * M + M * c.Q).cwiseAbs().maxCoeff());
    worstRow = std::max({worstRow, c.P.rowwise().sum().cwiseAbs().maxCoeff(), c.Q.rowwise().sum().cwiseAbs().maxCoeff()});
    ++cases;
  }
  const double s = seconds_since(t0);
  return {worstRes <= 1e-9 && worstRow <= 1e-12 && s < 1,
          fmt("100 cases, max residual %.3g, max row sum %.3g, %.3f s", worstRes, worstRow, s)};
}

struct CorpusRun {
  std::vector<DerivationWitness> witnesses;
  Outcome outcome;
};

CorpusRun corpus() {
  CorpusRun run;
  ConstructionConfig cfg;
  cfg.stepTol = 1e-7;
  int ok = 0, exact = 0;
  double slowest = 0, worstTV = 0;
  std::ostringstream failures;
  for (const Matrix& m : construction_corpus()) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ConstructionResult r = derive_nonblock(JointDistribution{m}, cfg);
      const double s = seconds_since(t0);
      slowest = std::max(slowest, s);
      worstTV = std::max(worstTV, r.achievedTV);
      const bool good = r.report.verdict && validate_witness(r.witness, 1e-7).verdict && r.achievedTV <= 1e-2 && s < 60;
      ok += good;
      exact += r.achievedTV <= 1e-12;
      run.witnesses.push_back(std::move(r.witness));
    } catch (const Error& e) {
      failures << " [" << m.rows() << "x" << m.cols() << ": " << e.what() << "]";
    }
  }
  run.outcome = {ok == 20, fmt("%d/20 valid (%d exact, rest within delta/2), max TV %.3g, slowest %.2f s", ok, exact, worstTV,
                               slowest) +
                               failures.str()};
  return run;
}

Outcome mutation(const std::vector<DerivationWitness>& ws) {
  if (ws.empty()) return {false, "no corpus witnesses"};
  std::mt19937_64 rng(8);
  int flipped = 0;
  for (int k = 0; k < 100; ++k) {
    const DerivationWitness& w = ws[k % ws.size()];
    flipped += !validate_witness(mutate_witness(w, rng), w.tol).verdict;
  }
  return {flipped >= 95, fmt("%d/100 mutations rejected over %zu witnesses", flipped, ws.size())};
}

Outcome algebra() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  auto stochastic = [&](int r, int c) {
    Matrix s(r, c);
    for (int i = 0; i < r * c; ++i) s(i / c, i % c) = u(rng);
    for (int i = 0; i < r; ++i) s.row(i) /= s.row(i).sum();
    return s;
  };
  double worstLift = 0, worstEntropy = 0;
  bool valid = true;
  for (int k = 0; k < 50; ++k) {
    const DerivationWitness w = k % 2 ? d_epsilon_chain(k % 4) : product_witness(d_epsilon_chain(1), d_epsilon_chain(k % 3));
    const int m = static_cast<int>(w.base.rows()), n = static_cast<int>(w.base.cols());
    const Matrix A = stochastic(m, 2 + k % 3), B = stochastic(n, 2 + (k / 3) % 3);
    const DerivationWitness l = stochastic_lift(w, A, B);
    worstLift = std::max(worstLift, oracle::max_abs_diff(l.base, A.transpose() * w.base * B));
    valid &= validate_witness(l).verdict;

    const DerivationWitness a = d_epsilon_chain(k % 5), b = stochastic_lift(d_epsilon_chain(k % 3), stochastic(2, 3), stochastic(2, 2));
    std::vector<double> pa(a.base.data(), a.base.data() + a.base.size()), pb(b.base.data(), b.base.data() + b.base.size());
    const Matrix prod = product_witness(a, b).base;
    std::vector<double> pp(prod.data(), prod.data() + prod.size());
    worstEntropy = std::max(worstEntropy, std::abs(oracle::entropy(pp) - oracle::entropy(pa) - oracle::entropy(pb)));
  }
  return {worstLift <= 1e-12 && worstEntropy <= 1e-10 && valid,
          fmt("lift base error %.3g, product entropy defect %.3g, lifts valid: %s", worstLift, worstEntropy, valid ? "yes" : "no")};
}

Outcome rates() {
  const RateVerdict r = rate_bound({1, 1, 1}, 1, 1, 1);
  bool ok = r.bound.rhs == 3.5;
  for (int u = 0; u <= 3; ++u)
    for (int v = 0; v <= 3; ++v)
      for (int w = 0; w <= 3; ++w)
        for (int k = 0; k <= 4; ++k)
          ok &= rate_bound({double(u), double(v), double(w)}, k, 0, 0).bound.rhs == v + w + (2 - std::ldexp(1.0, -k)) * u;
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> x(0, 5);
  std::uniform_int_distribution<int> kk(0, 30);
  int dominated = 0;
  for (int t = 0; t < 100; ++t) {
    const RateVerdict v = rate_bound({x(rng), x(rng), x(rng)}, kk(rng), x(rng), x(rng));
    dominated += v.bound.rhs <= v.generic.rhs;
  }
  return {ok && dominated == 100, fmt("rhs(1,1,1;k=1) = %.1f, integer grid exact: %s, dominated %d/100", r.bound.rhs,
                                      ok ? "yes" : "no", dominated)};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };
  report(1, "D_eps chain", chain);
  report(2, "exhaustive gamma check, order 3", exhaustive_gamma);
  report(3, "block detection vs brute force", block_oracle);
  report(4, "block matrix counterexample", corollary);
  report(5, "order lower bound", lower_bound);
  report(6, "correction solver", solver);
  CorpusRun run;
  report(7, "construction corpus", [&] {
    run = corpus();
    return run.outcome;
  });
  report(8, "witness mutation", [&] { return mutation(run.witnesses); });
  report(9, "lift and product algebra", algebra);
  report(10, "rate bound arithmetic", rates);
  std::printf("%d/10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
