#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "condind/error.hpp"

namespace cind {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Joint law of a pair (a,b): rows index a, columns index b.
struct JointDistribution {
  Matrix p;

  int rows() const { return static_cast<int>(p.rows()); }
  int cols() const { return static_cast<int>(p.cols()); }
};

// Checks the invariants without repairing anything.
JointDistribution validate_distribution(const Matrix& grid, double sumTol = 1e-12);

// Explicit ingestion helper: clips nothing, only rescales a nonnegative grid.
JointDistribution normalize(const Matrix& grid);

// Throws NotStochastic unless entries are >= 0 and rows sum to 1.
void check_stochastic(const Matrix& s, double tol = 1e-12);

// Dense joint over several axes, row-major (last axis fastest).
struct Joint {
  std::vector<int> dims;
  std::vector<double> p;

  Joint() = default;
  Joint(std::vector<int> d, std::vector<double> v);
  static Joint from_matrix(const Matrix& m);
  Matrix as_matrix() const;  // requires exactly two axes
  std::size_t size() const { return p.size(); }
};

Joint marginal(const Joint& j, const std::vector<int>& keep);

double entropy(std::span<const double> p);
double entropy(const Vector& p);
double entropy(const Joint& j);

// H(rows | cols) of a joint matrix.
double conditional_entropy(const Matrix& xy);
double mutual_information(const Matrix& xy);
// I(X:Y|Z) for a joint over axes (X,Y,Z).
double conditional_mutual_information(const Joint& xyz);

double total_variation(const Matrix& p, const Matrix& q);

// q(g | a,b): row a*cols+b of `q` is a distribution over gamma values.
struct GammaCoupling {
  int range = 0;
  Matrix q;
};

GammaCoupling deterministic_gamma(int rows, int cols, const std::vector<int>& values, int range);

// Joint over (a, b, gamma).
Joint couple_gamma(const JointDistribution& j, const GammaCoupling& g);

using InfoReport = std::map<std::string, double>;

// H(g), H(g|a), H(g|b), H(g|ab), I(g:ab), I(g:a|b), I(g:b|a), I(a:b) from a joint over (a,b,g).
InfoReport info_report(const Joint& abg);

// Values in (-1e-10, 0) are float noise and clamp to zero.
inline constexpr double kClampTol = 1e-10;

}  // namespace cind
