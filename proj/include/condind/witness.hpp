#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "condind/distribution.hpp"

namespace cind {

// Joint of one derivation step over (a, b, a*, b*), row-major.
//
// A step is either dense (`t` holds every entry) or the law of independent
// factors (`factors`), each axis indexed in mixed radix with the first factor
// most significant. Products of long chains stay small this way; marginals and
// conditional informations are computed factor by factor.
struct QuadJoint {
  std::array<int, 4> dims{1, 1, 1, 1};
  std::vector<double> t;
  std::vector<QuadJoint> factors;

  static QuadJoint dense(std::array<int, 4> dims, std::vector<double> t);
  static QuadJoint product(const std::vector<QuadJoint>& parts);
  // A step whose starred pair is constant: t(a,b,0,0) = p(a,b).
  static QuadJoint constant_stars(const Matrix& p);

  bool factored() const { return !factors.empty(); }
  std::size_t entries() const;
  std::size_t index(int a, int b, int x, int y) const {
    return ((static_cast<std::size_t>(a) * dims[1] + b) * dims[2] + x) * dims[3] + y;
  }

  QuadJoint materialize(std::size_t maxEntries = std::size_t{1} << 26) const;
  Matrix ab_marginal() const;
  Matrix star_marginal() const;
  double cmi_given_astar() const;  // I(a:b|a*)
  double cmi_given_bstar() const;  // I(a:b|b*)
  double total() const;
  double min_entry() const;
};

struct DerivationWitness {
  Matrix base;
  std::vector<QuadJoint> steps;
  double tol = 1e-9;  // declared validation tolerance in bits

  int order() const { return static_cast<int>(steps.size()); }
  // Law of the last pair (the base for order 0).
  Matrix final_pair() const;
};

struct StepReport {
  double cmiA = 0;  // I(a:b|a*)
  double cmiB = 0;  // I(a:b|b*)
  double marginalTV = 0;
  bool wellFormed = true;  // nonnegative, total 1
};

struct ValidationReport {
  std::vector<StepReport> perStep;
  double finalMI = 0;
  bool verdict = false;
  double tol = 0;
  int firstBadStep = -1;  // -1: steps fine (the final pair may still fail)

  double max_cmi() const;
};

inline constexpr double kMarginalTol = 1e-12;

ValidationReport validate_witness(const DerivationWitness& w, double tol);
inline ValidationReport validate_witness(const DerivationWitness& w) { return validate_witness(w, w.tol); }

DerivationWitness independent_witness(const JointDistribution& j, double tol = 1e-9);

// Pushes the (a,b) axes of the base and of step 0 forward under (f,g).
// Output sizes default to 1 + max value of the map.
DerivationWitness map_witness(const DerivationWitness& w, const std::vector<int>& f, const std::vector<int>& g,
                              int rowsOut = -1, int colsOut = -1);
DerivationWitness pad_witness(const DerivationWitness& w, int order);
DerivationWitness product_witness(const DerivationWitness& w1, const DerivationWitness& w2);
DerivationWitness power_witness(const DerivationWitness& w, int n);
// Swaps the roles of a and b throughout.
DerivationWitness transpose_witness(const DerivationWitness& w);

Matrix kron(const Matrix& a, const Matrix& b);

// Visits the nonzero entries of a step without materializing products.
using EntryFn = std::function<void(int a, int b, int x, int y, double v)>;
void for_each_nonzero(const QuadJoint& q, const EntryFn& fn);

}  // namespace cind
