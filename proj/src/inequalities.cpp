#include "condind/inequalities.hpp"

#include <cmath>
#include <limits>

#include "condind/structure.hpp"

namespace cind {

BoundVerdict make_verdict(double lhs, double rhs, double tol) {
  BoundVerdict v{lhs, rhs, false, rhs - lhs};
  v.holds = v.slack >= -tol;
  return v;
}

BoundVerdict check_theorem1(const JointDistribution& j, const GammaCoupling& g, int k) {
  if (k < 0) throw Error(Errc::OutOfRange, "k must be >= 0");
  const InfoReport r = info_report(couple_gamma(j, g));
  const double c = std::ldexp(1.0, k);
  return make_verdict(r.at("H(g)"), c * (r.at("H(g|a)") + r.at("H(g|b)")));
}

Theorem3Verdict check_theorem3(const JointDistribution& j, const GammaCoupling& g, int k) {
  if (k < 0) throw Error(Errc::OutOfRange, "k must be >= 0");
  const InfoReport r = info_report(couple_gamma(j, g));
  const double c = std::ldexp(1.0, k);
  Theorem3Verdict v;
  v.entropyForm = make_verdict(r.at("H(g)"), c * r.at("H(g|a)") + c * r.at("H(g|b)") - (2 * c - 1) * r.at("H(g|ab)"));
  v.infoForm = make_verdict(r.at("I(g:ab)"), c * r.at("I(g:a|b)") + c * r.at("I(g:b|a)"));
  if (std::abs(v.entropyForm.slack - v.infoForm.slack) > 1e-10)
    throw Error(Errc::OutOfRange, "entropy and information forms disagree");
  return v;
}

SweepResult gamma_sweep(const JointDistribution& j, int k, int maxRange, SweepBound bound) {
  const int cells = j.rows() * j.cols();
  if (cells > 9 || maxRange > 4) throw Error(Errc::TooLarge, "sweep needs rows*cols <= 9 and range <= 4");
  if (maxRange < 1) throw Error(Errc::OutOfRange, "range must be >= 1");
  SweepResult best;
  best.verdict.slack = std::numeric_limits<double>::infinity();
  best.maxRatio = 0;
  std::vector<int> map(cells, 0);
  long total = 1;
  for (int c = 0; c < cells; ++c) total *= maxRange;
  for (long code = 0; code < total; ++code) {
    long x = code;
    for (int c = cells - 1; c >= 0; --c) {
      map[c] = static_cast<int>(x % maxRange);
      x /= maxRange;
    }
    const GammaCoupling g = deterministic_gamma(j.rows(), j.cols(), map, maxRange);
    const BoundVerdict v =
        bound == SweepBound::Theorem1 ? check_theorem1(j, g, k) : check_theorem3(j, g, k).entropyForm;
    if (v.slack < best.verdict.slack) {
      best.verdict = v;
      best.worst = g;
      best.worstMap = map;
    }
    const InfoReport r = info_report(couple_gamma(j, g));
    const double den = r.at("H(g|a)") + r.at("H(g|b)");
    double ratio;
    if (den <= 1e-12)
      ratio = r.at("H(g)") > 1e-12 ? std::numeric_limits<double>::infinity() : 0.0;
    else
      ratio = r.at("H(g)") / den;
    if (ratio > best.maxRatio || best.ratioMap.empty()) {
      best.maxRatio = std::max(best.maxRatio, ratio);
      best.ratioMap = map;
    }
  }
  return best;
}

BlockCounterexample block_counterexample(const JointDistribution& j) {
  const auto split = block_split(j.p);
  if (!split) throw Error(Errc::NotBlock, "matrix is not a block matrix");
  std::vector<int> inI1(j.rows(), 0);
  for (int i : split->I1) inI1[i] = 1;
  // gamma = 0 on the first block; off-block cells carry no mass.
  std::vector<int> map(j.rows() * j.cols());
  for (int a = 0; a < j.rows(); ++a)
    for (int b = 0; b < j.cols(); ++b) map[a * j.cols() + b] = inI1[a] ? 0 : 1;
  BlockCounterexample out{deterministic_gamma(j.rows(), j.cols(), map, 2), {}};
  out.report = info_report(couple_gamma(j, out.gamma));
  return out;
}

double order_lower_bound(const JointDistribution& j, int maxRange) {
  const SweepResult s = gamma_sweep(j, 0, maxRange);
  if (std::isinf(s.maxRatio)) return std::numeric_limits<double>::infinity();
  return s.maxRatio <= 1.0 ? 0.0 : std::log2(s.maxRatio);
}

RateVerdict rate_bound(const RatePoint& r, int k, double hAlpha, double hBeta) {
  if (r.u < 0 || r.v < 0 || r.w < 0) throw Error(Errc::NegativeRate, "rates must be nonnegative");
  if (k < 0) throw Error(Errc::OutOfRange, "k must be >= 0");
  if (hAlpha < 0 || hBeta < 0) throw Error(Errc::OutOfRange, "entropies must be nonnegative");
  const double lhs = hAlpha + hBeta;
  RateVerdict v{make_verdict(lhs, r.v + r.w + (2.0 - std::ldexp(1.0, -k)) * r.u),
                make_verdict(lhs, r.v + r.w + 2.0 * r.u)};
  if (v.bound.rhs > v.generic.rhs) throw Error(Errc::OutOfRange, "bound exceeds the generic bound");
  return v;
}

double lemma12_bound(double hMu, double eps, int m) {
  if (!(eps >= 0 && eps < 0.5)) throw Error(Errc::EpsOutOfRange, "eps must lie in [0, 1/2)");
  if (m < 1) throw Error(Errc::OutOfRange, "m must be >= 1");
  return hMu + 1.0 + eps * std::log2(static_cast<double>(m));
}

BoundVerdict common_information_bound(const DerivationWitness& w, int n, const GammaCoupling& g) {
  if (n < 1) throw Error(Errc::BadN, "n must be >= 1");
  double rows = std::pow(static_cast<double>(w.base.rows()), n), cols = std::pow(static_cast<double>(w.base.cols()), n);
  if (rows * cols > 4096) throw Error(Errc::TooLarge, "n-fold base too large to enumerate");
  return check_theorem1(JointDistribution{power_witness(w, n).base}, g, w.order());
}

}  // namespace cind
