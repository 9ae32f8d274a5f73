#pragma once

#include <vector>

#include "condind/structure.hpp"
#include "condind/witness.hpp"

namespace cind {

struct NewtonConfig {
  double theta = 0.9;         // cap on the initial mixing weight
  double damping = 0.5;       // step shrink factor when a step leaves the positive cone
  int maxIters = 100;
  double residualEta = 1e-8;  // required max-norm residual of A^T G B - M
};

struct ConstructionConfig {
  double delta = 1e-2;    // allowed total variation to the target
  double stepTol = 1e-7;  // per-step conditional information tolerance, bits
  NewtonConfig newton;
  int maxOrder = 1 << 16;
  int epsScheduleHalvings = 60;
  double zeroTol = 0.0;
  int maxGrid = 8;        // largest square matrix handed to the Newton stage
  // Fraction of a part's cell mass that grid couplings may move off the diagonal.
  double perturbScale = 0.9;
  // When the exact recursion fails, derive the target mixed toward r c^T
  // instead, spending at most half of delta.
  bool smoothFallback = true;
};

void check_config(const ConstructionConfig& cfg);

struct ConstructionResult {
  DerivationWitness witness;
  double achievedTV = 0;
  ValidationReport report;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(double residual, const std::string& what) : Error(Errc::NoConvergence, what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

JointDistribution d_epsilon(double eps);
// eps_0 = 1/4, eps_{t+1} = eps_t (1 - eps_t).
double eps_sequence(int n);
DerivationWitness d_epsilon_chain(int n);

// Chain of order t whose base keeps the diagonal ratio w : (1-w) and sharpens
// toward diag(w, 1-w). Equal weights give exactly the D_eps chain.
DerivationWitness weighted_chain(double w, int t);
// Exactly good n x n matrix near diag(c) (product of weighted chains, merged).
DerivationWitness sharp_good(const Vector& c, int t);

JointDistribution dyadic_approx(const JointDistribution& j, int N);

struct BernoulliEncoding {
  int N = 0;
  std::vector<int> f;  // string (as an integer, first trial most significant) -> row
  std::vector<int> g;  // string -> column
};
BernoulliEncoding bernoulli_encoding(const JointDistribution& d, int N);

ConstructionResult approximate_good(const JointDistribution& j, double delta, int maxN = 8);

// Witness for A^T M B given a witness for M.
DerivationWitness stochastic_lift(const DerivationWitness& w, const Matrix& A, const Matrix& B);

struct Correction {
  Matrix P, Q;
};
// sign +1: R = P^T M + M Q; sign -1: R = -P^T M - M Q. Rows of P and Q sum to 0.
Correction solve_correction(const Matrix& M, const Matrix& R, int sign = 1);

struct PositiveFactorResult {
  ConstructionResult result;
  Matrix A, B;             // strictly positive row-stochastic
  DerivationWitness good;  // witness for G, base = G
  double residual = 0;     // max |A^T G B - M|
  int iterations = 0;
  int chainLength = 0;
};

PositiveFactorResult positive_nonsingular_witness(const JointDistribution& M, const ConstructionConfig& cfg);

// M = F S with F square, positive, nonsingular, summing to 1 and S row-stochastic.
struct Factorization {
  Matrix F, S;
};
Factorization tall_factorization(const Matrix& M);
Factorization mixing_factorization(const Matrix& M);

ConstructionResult positive_witness(const JointDistribution& M, const ConstructionConfig& cfg);

// grid[i][j] is the block N_ij; the result has order order(pWitness)+1.
// Blocks are rescaled so that their masses agree exactly with pWitness.base.
DerivationWitness block_compose(const std::vector<std::vector<Matrix>>& grid, const DerivationWitness& pWitness);

// Decomposition used by derive_nonblock: a covering chain of row- or column-maximal
// rectangles minimising the size of the final positive grid (m*n <= 16).
RDecomposition grid_decomposition(const Matrix& M, double zeroTol = 0.0, int maxLength = 6);
// Size of that final grid for a chain whose summands split into p_l parts.
int predicted_grid(const std::vector<int>& parts);

ConstructionResult derive_nonblock(const JointDistribution& M, const ConstructionConfig& cfg);

}  // namespace cind
