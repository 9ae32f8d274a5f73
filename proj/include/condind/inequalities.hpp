#pragma once

#include <vector>

#include "condind/distribution.hpp"
#include "condind/witness.hpp"

namespace cind {

inline constexpr double kViolationTol = 1e-9;

struct BoundVerdict {
  double lhs = 0;
  double rhs = 0;
  bool holds = false;
  double slack = 0;  // rhs - lhs
};

BoundVerdict make_verdict(double lhs, double rhs, double tol = kViolationTol);

// H(g) <= 2^k (H(g|a) + H(g|b)).
BoundVerdict check_theorem1(const JointDistribution& j, const GammaCoupling& g, int k);

struct Theorem3Verdict {
  BoundVerdict entropyForm;  // H(g) <= 2^k H(g|a) + 2^k H(g|b) - (2^{k+1}-1) H(g|ab)
  BoundVerdict infoForm;     // I(g:ab) <= 2^k I(g:a|b) + 2^k I(g:b|a)
};
// Throws if the two forms disagree by more than 1e-10 in slack.
Theorem3Verdict check_theorem3(const JointDistribution& j, const GammaCoupling& g, int k);

struct SweepResult {
  std::vector<int> worstMap;  // gamma value per cell, row-major
  GammaCoupling worst;
  BoundVerdict verdict;       // for the worst map
  double maxRatio = 0;        // H(g)/(H(g|a)+H(g|b)); +inf when the denominator vanishes
  std::vector<int> ratioMap;  // map attaining maxRatio
};

enum class SweepBound { Theorem1, Theorem3 };

// All deterministic maps cell -> {0..maxRange-1}; rows*cols <= 9, maxRange <= 4.
SweepResult gamma_sweep(const JointDistribution& j, int k, int maxRange, SweepBound bound = SweepBound::Theorem1);

struct BlockCounterexample {
  GammaCoupling gamma;
  InfoReport report;
};
BlockCounterexample block_counterexample(const JointDistribution& j);

// log2 of the best ratio over the sweep, clamped at 0; +inf for block matrices.
double order_lower_bound(const JointDistribution& j, int maxRange);

struct RatePoint {
  double u = 0, v = 0, w = 0;
};

struct RateVerdict {
  BoundVerdict bound;    // rhs = v + w + (2 - 2^-k) u
  BoundVerdict generic;  // rhs = v + w + 2u
};
RateVerdict rate_bound(const RatePoint& r, int k, double hAlpha, double hBeta);

double lemma12_bound(double hMu, double eps, int m);

// check_theorem1 on the n-fold base with k = order(w); gamma is a coupling on that base.
BoundVerdict common_information_bound(const DerivationWitness& w, int n, const GammaCoupling& g);

}  // namespace cind
