#include "condind/construction.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <limits>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cind {

void check_config(const ConstructionConfig& cfg) {
  auto bad = [](const std::string& what) { throw Error(Errc::OutOfRange, "config: " + what); };
  if (!(cfg.delta > 0 && cfg.delta <= 1)) bad("delta must lie in (0,1]");
  if (!(cfg.stepTol > 0)) bad("stepTol must be positive");
  if (!(cfg.newton.theta > 0 && cfg.newton.theta < 1)) bad("theta must lie in (0,1)");
  if (!(cfg.newton.damping > 0 && cfg.newton.damping < 1)) bad("damping must lie in (0,1)");
  if (cfg.newton.maxIters < 1) bad("maxIters must be >= 1");
  if (!(cfg.newton.residualEta > 0)) bad("residualEta must be positive");
  if (cfg.maxOrder < 0) bad("maxOrder must be >= 0");
  if (cfg.maxGrid < 2) bad("maxGrid must be >= 2");
  if (!(cfg.perturbScale > 0 && cfg.perturbScale < 1)) bad("perturbScale must lie in (0,1)");
}

// ---- chains ---------------------------------------------------------------

JointDistribution d_epsilon(double eps) {
  if (!(eps >= 0 && eps <= 0.5)) throw Error(Errc::OutOfRange, "eps must lie in [0, 1/2]");
  Matrix d(2, 2);
  d << 0.5 - eps, eps, eps, 0.5 - eps;
  return JointDistribution{d};
}

double eps_sequence(int n) {
  double e = 0.25;
  for (int i = 0; i < n; ++i) e *= (1.0 - e);
  return e;
}

namespace {

// Step from the coarse pair `g` (starred) to the next pair: equal outcomes are
// kept, unequal ones are resampled from `q`.
QuadJoint resample_step(const Matrix& g, const Matrix& q) {
  std::vector<double> t(16, 0.0);
  auto at = [&](int a, int b, int x, int y) -> double& { return t[((a * 2 + b) * 2 + x) * 2 + y]; };
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      if (x == y) {
        at(x, y, x, y) = g(x, y);
        continue;
      }
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) at(a, b, x, y) = g(x, y) * q(a, b);
    }
  return QuadJoint::dense({2, 2, 2, 2}, std::move(t));
}

Matrix fine_pair(const Matrix& g, const Matrix& q) {
  Matrix out = Matrix::Zero(2, 2);
  out(0, 0) = g(0, 0);
  out(1, 1) = g(1, 1);
  out += (g(0, 1) + g(1, 0)) * q;
  return out;
}

// Resampling table for a symmetric 2x2 pair [[a,b],[b,d]] that makes both
// conditionals of the step exactly rank 1: q = [[a k, (1-s k)/2], [(1-s k)/2, d k]]
// with k the smaller root of k^2 (a-d)^2/4 - k (s/2 + a d/b) + 1/4 = 0.
Matrix weighted_table(const Matrix& g) {
  const double a = g(0, 0), b = g(0, 1), d = g(1, 1), s = a + d;
  const double qa = (a - d) * (a - d) / 4, qb = -(s / 2 + a * d / b), qc = 0.25;
  double k;
  if (qa < 1e-300) {
    k = qc / -qb;
  } else {
    // Stable form of the smaller root.
    const double disc = std::sqrt(std::max(0.0, qb * qb - 4 * qa * qc));
    k = 2 * qc / (-qb + disc);
  }
  Matrix q(2, 2);
  q << a * k, (1 - s * k) / 2, (1 - s * k) / 2, d * k;
  return q;
}

}  // namespace

DerivationWitness d_epsilon_chain(int n) {
  if (n < 0) throw Error(Errc::OutOfRange, "order must be >= 0");
  std::vector<double> eps(n + 1);
  for (int i = 0; i <= n; ++i) eps[i] = eps_sequence(i);
  DerivationWitness w{d_epsilon(eps[n]).p, {}, 1e-9};
  // Pair i has parameter eps[n-i]; step i resamples from the coarser pair eps[n-i-1].
  for (int i = 0; i < n; ++i) {
    const double e = eps[n - i - 1];
    Matrix q(2, 2);
    q << e / 2, (1 - e) / 2, (1 - e) / 2, e / 2;
    w.steps.push_back(resample_step(d_epsilon(e).p, q));
  }
  return w;
}

DerivationWitness weighted_chain(double wt, int t) {
  if (!(wt > 0 && wt < 1)) throw Error(Errc::OutOfRange, "weight must lie in (0,1)");
  if (t < 0) throw Error(Errc::OutOfRange, "order must be >= 0");
  // Independent start whose diagonal ratio is wt : (1-wt); the step keeps that ratio.
  const double x = std::sqrt(wt) / (std::sqrt(wt) + std::sqrt(1 - wt));
  Vector v(2);
  v << x, 1 - x;
  std::vector<Matrix> pairs{v * v.transpose()};
  std::vector<Matrix> tables;
  for (int i = 0; i < t; ++i) {
    tables.push_back(weighted_table(pairs.back()));
    pairs.push_back(fine_pair(pairs.back(), tables.back()));
  }
  DerivationWitness w{pairs.back(), {}, 1e-9};
  for (int i = t - 1; i >= 0; --i) w.steps.push_back(resample_step(pairs[i], tables[i]));
  return w;
}

DerivationWitness sharp_good(const Vector& c, int t) {
  const int n = static_cast<int>(c.size());
  if (n < 1) throw Error(Errc::ShapeMismatch, "empty weight vector");
  if (n == 1) return DerivationWitness{Matrix::Ones(1, 1), {}, 1e-9};
  const int h = (n + 1) / 2;
  const double wl = c.head(h).sum() / c.sum();
  const DerivationWitness top = weighted_chain(wl, t);
  const DerivationWitness L = sharp_good(c.head(h) / c.head(h).sum(), t);
  const DerivationWitness R = sharp_good(c.tail(n - h) / c.tail(n - h).sum(), t);
  const DerivationWitness prod = product_witness(product_witness(top, L), R);
  // State (top, left, right) -> left state when top = 0, h + right state otherwise.
  const int nl = static_cast<int>(L.base.rows()), nr = static_cast<int>(R.base.rows());
  std::vector<int> f(2 * nl * nr);
  for (int s = 0; s < 2; ++s)
    for (int l = 0; l < nl; ++l)
      for (int r = 0; r < nr; ++r) f[(s * nl + l) * nr + r] = s == 0 ? l : h + r;
  return map_witness(prod, f, f, n, n);
}

// ---- dyadic approximation ------------------------------------------------

JointDistribution dyadic_approx(const JointDistribution& j, int N) {
  if (N < 0 || N > 52) throw Error(Errc::OutOfRange, "N must lie in [0, 52]");
  const double scale = std::ldexp(1.0, N);
  const int m = j.rows(), n = j.cols();
  std::vector<double> fl(m * n), rem(m * n);
  double units = scale;
  for (int c = 0; c < m * n; ++c) {
    const double v = j.p(c / n, c % n) * scale;
    fl[c] = std::floor(v);
    rem[c] = v - fl[c];
    units -= fl[c];
  }
  std::vector<int> order(m * n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return rem[x] > rem[y]; });
  for (int k = 0; k < static_cast<int>(std::llround(units)); ++k) fl[order[k % (m * n)]] += 1;
  Matrix d(m, n);
  for (int c = 0; c < m * n; ++c) d(c / n, c % n) = fl[c] / scale;
  return JointDistribution{d};
}

BernoulliEncoding bernoulli_encoding(const JointDistribution& d, int N) {
  if (N < 0 || N > 30) throw Error(Errc::OutOfRange, "N must lie in [0, 30]");
  const double scale = std::ldexp(1.0, N);
  BernoulliEncoding e{N, {}, {}};
  for (int i = 0; i < d.rows(); ++i)
    for (int j = 0; j < d.cols(); ++j) {
      const double v = d.p(i, j) * scale;
      if (std::abs(v - std::round(v)) > 1e-9) throw Error(Errc::NotDyadic, "entry is not a multiple of 2^-N");
      for (long k = 0; k < std::lround(v); ++k) {
        e.f.push_back(i);
        e.g.push_back(j);
      }
    }
  if (static_cast<double>(e.f.size()) != scale) throw Error(Errc::NotDyadic, "entries do not sum to 1");
  return e;
}

ConstructionResult approximate_good(const JointDistribution& j, double delta, int maxN) {
  if (!(delta > 0)) throw Error(Errc::OutOfRange, "delta must be positive");
  if (is_rank1(j.p, 1e-12)) {
    ConstructionResult r{independent_witness(j, 1e-9), 0.0, {}};
    r.report = validate_witness(r.witness);
    return r;
  }
  int N = 0;
  JointDistribution d = dyadic_approx(j, 0);
  while (total_variation(d.p, j.p) > delta / 2) {
    if (++N > maxN) throw Error(Errc::TooLarge, "dyadic level needed exceeds maxN");
    d = dyadic_approx(j, N);
  }
  // Correlation error: TV(D_eps^N, D_0^N) <= 2 eps N.
  int t = 0;
  while (2 * eps_sequence(t) * N > delta / 2) ++t;
  const BernoulliEncoding enc = bernoulli_encoding(d, N);
  DerivationWitness w = N == 0 ? DerivationWitness{Matrix::Ones(1, 1), {}, 1e-9}
                               : power_witness(d_epsilon_chain(t), N);
  w = map_witness(w, enc.f, enc.g, j.rows(), j.cols());
  ConstructionResult r{w, total_variation(w.base, j.p), {}};
  r.report = validate_witness(r.witness);
  return r;
}

// ---- lifting and the correction solver ------------------------------------

DerivationWitness stochastic_lift(const DerivationWitness& w, const Matrix& A, const Matrix& B) {
  if (A.rows() != w.base.rows() || B.rows() != w.base.cols())
    throw Error(Errc::ShapeMismatch, "stochastic factors do not match the witness base");
  check_stochastic(A);
  check_stochastic(B);
  DerivationWitness out{A.transpose() * w.base * B, w.steps, w.tol};
  if (w.steps.empty()) return out;
  const QuadJoint& s = w.steps.front();
  const int R = static_cast<int>(A.cols()), C = static_cast<int>(B.cols());
  const std::size_t n = static_cast<std::size_t>(R) * C * s.dims[2] * s.dims[3];
  if (n > (std::size_t{1} << 26)) throw Error(Errc::TooLarge, "lifted step tensor too large");
  QuadJoint m = QuadJoint::dense({R, C, s.dims[2], s.dims[3]}, std::vector<double>(n, 0.0));
  // Independent transitions a -> a' ~ A(a,.), b -> b' ~ B(b,.).
  for_each_nonzero(s, [&](int a, int b, int x, int y, double v) {
    for (int i = 0; i < R; ++i) {
      const double va = v * A(a, i);
      if (va == 0.0) continue;
      for (int k = 0; k < C; ++k) m.t[m.index(i, k, x, y)] += va * B(b, k);
    }
  });
  out.steps.front() = std::move(m);
  return out;
}

namespace {

double inverse_condition(const Matrix& M) {
  Eigen::JacobiSVD<Matrix> svd(M);
  const Vector sv = svd.singularValues();
  return sv(0) > 0 ? sv(sv.size() - 1) / sv(0) : 0.0;
}

}  // namespace

Correction solve_correction(const Matrix& M, const Matrix& R, int sign) {
  if (M.rows() != M.cols() || R.rows() != M.rows() || R.cols() != M.cols())
    throw Error(Errc::ShapeMismatch, "M must be square and R of the same shape");
  if (sign != 1 && sign != -1) throw Error(Errc::OutOfRange, "sign must be +1 or -1");
  if (inverse_condition(M) < 1e-14) throw Error(Errc::SingularM, "M is numerically singular");
  if (std::abs(R.sum()) > 1e-10) throw Error(Errc::NonzeroSum, "entries of R must sum to 0");
  const Eigen::Index n = M.rows();
  // Q' has every row equal to the column means of R; P' = (R - Q')^T.
  const Matrix Qp = Vector::Ones(n) * (R.colwise().sum() / static_cast<double>(n));
  const Matrix Pp = (R - Qp).transpose();
  const auto lu = M.partialPivLu();
  Correction c{lu.transpose().solve(Pp), lu.solve(Qp)};
  if (sign < 0) {
    c.P = -c.P;
    c.Q = -c.Q;
  }
  return c;
}

// ---- positive matrices ----------------------------------------------------

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

ConstructionResult finish(DerivationWitness w, const Matrix& target, double tol) {
  w.tol = tol;
  ConstructionResult r{std::move(w), 0.0, {}};
  r.achievedTV = total_variation(r.witness.base, target);
  r.report = validate_witness(r.witness, tol);
  return r;
}

struct NewtonRun {
  Matrix A, B;
  double residual = 0;
  int iterations = 0;
};

// Moves (A,B) so that A^{-T} M B^{-1} reaches G, keeping both positive and stochastic.
NewtonRun newton_to(const Matrix& M, const Matrix& G, Matrix A, Matrix B, const NewtonConfig& nc) {
  auto psi = [&](const Matrix& a, const Matrix& b) -> Matrix {
    const Matrix left = a.transpose().partialPivLu().solve(M);
    return b.transpose().partialPivLu().solve(left.transpose()).transpose();
  };
  Matrix X = psi(A, B);
  double res = max_abs(G - X);
  int it = 0;
  for (; it < nc.maxIters && res > 1e-15; ++it) {
    Correction c;
    try {
      c = solve_correction(X, G - X, -1);
    } catch (const Error&) {
      break;
    }
    bool moved = false;
    for (double s = 1.0; s > 1e-12; s *= nc.damping) {
      const Matrix An = A + s * c.P * A, Bn = B + s * c.Q * B;
      if (An.minCoeff() <= 0 || Bn.minCoeff() <= 0) continue;
      const Matrix Xn = psi(An, Bn);
      const double rn = max_abs(G - Xn);
      if (rn < res) {
        A = An;
        B = Bn;
        X = Xn;
        res = rn;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  // Row sums drift only by rounding; restore them exactly.
  for (Eigen::Index i = 0; i < A.rows(); ++i) A.row(i) /= A.row(i).sum();
  for (Eigen::Index i = 0; i < B.rows(); ++i) B.row(i) /= B.row(i).sum();
  return {A, B, max_abs(A.transpose() * G * B - M), it};
}

}  // namespace

PositiveFactorResult positive_nonsingular_witness(const JointDistribution& Mj, const ConstructionConfig& cfg) {
  check_config(cfg);
  const Matrix& M = Mj.p;
  const Eigen::Index n = M.rows();
  if (M.cols() != n) throw Error(Errc::ShapeMismatch, "matrix must be square");
  if (M.minCoeff() <= 0) throw Error(Errc::ZeroEntry, "matrix has a zero entry");
  if (inverse_condition(M) < 1e-12) throw Error(Errc::SingularM, "matrix is numerically singular");

  // Exact interior start: with B0 = (1-theta) I + theta 1 c^T and
  // A0 = diag(c)^{-1} (M B0^{-1})^T we get psi(A0,B0) = diag(c).
  const Vector r = M.rowwise().sum();
  const Vector c = M.colwise().sum().transpose();
  double ratio = 1.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) ratio = std::min(ratio, M(i, j) / (r(i) * c(j)));
  const double theta = std::min(cfg.newton.theta, 0.5 * ratio);
  const Matrix B0 = (1 - theta) * Matrix::Identity(n, n) + theta * Vector::Ones(n) * c.transpose();
  const Matrix K = (M - theta * r * c.transpose()) / (1 - theta);  // M B0^{-1}
  const Matrix A0 = c.cwiseInverse().asDiagonal() * K.transpose();

  double best = std::numeric_limits<double>::infinity();
  for (int t = 4; t <= cfg.maxOrder; t *= 4) {
    DerivationWitness good = sharp_good(c, t);
    const NewtonRun run = newton_to(M, good.base, A0, B0, cfg.newton);
    best = std::min(best, run.residual);
    if (run.residual > cfg.newton.residualEta || run.A.minCoeff() <= 0 || run.B.minCoeff() <= 0) continue;
    PositiveFactorResult out;
    out.A = run.A;
    out.B = run.B;
    out.residual = run.residual;
    out.iterations = run.iterations;
    out.chainLength = t;
    out.result = finish(stochastic_lift(good, run.A, run.B), M, cfg.stepTol);
    out.good = std::move(good);
    return out;
  }
  std::ostringstream os;
  os << "Newton stage did not reach residual " << cfg.newton.residualEta << " (best " << best << ")";
  throw ConvergenceError(best, os.str());
}

Factorization tall_factorization(const Matrix& M) {
  const Eigen::Index m = M.rows(), n = M.cols();
  if (m <= n) throw Error(Errc::ShapeMismatch, "tall factorization needs more rows than columns");
  if (Eigen::FullPivLU<Matrix>(M).rank() < n) throw Error(Errc::SingularM, "columns are dependent");
  // Complete the columns to a basis with positive vectors u_k = e_j + 0.1 * 1.
  std::vector<Vector> us;
  Matrix cur = M;
  for (Eigen::Index j = 0; j < m && static_cast<Eigen::Index>(us.size()) < m - n; ++j) {
    Vector u = Vector::Constant(m, 0.1);
    u(j) += 1.0;
    Matrix trial(m, cur.cols() + 1);
    trial << cur, u;
    if (Eigen::FullPivLU<Matrix>(trial).rank() == trial.cols()) {
      cur = trial;
      us.push_back(u);
    }
  }
  if (static_cast<Eigen::Index>(us.size()) != m - n) throw Error(Errc::SingularM, "could not complete a basis");
  Vector usum = Vector::Zero(m);
  for (const Vector& u : us) usum += u;
  // Scale so that v_1 - sum u_k stays positive.
  const double s = 0.5 * (M.col(0).array() / usum.array()).minCoeff();
  Factorization f{Matrix(m, m), Matrix::Zero(m, n)};
  f.F.col(0) = M.col(0) - s * usum;
  for (Eigen::Index j = 1; j < n; ++j) f.F.col(j) = M.col(j);
  for (Eigen::Index k = 0; k < m - n; ++k) f.F.col(n + k) = s * us[k];
  f.S.topRows(n) = Matrix::Identity(n, n);
  for (Eigen::Index k = n; k < m; ++k) f.S(k, 0) = 1.0;
  return f;
}

Factorization mixing_factorization(const Matrix& M) {
  const Eigen::Index m = M.rows();
  if (M.minCoeff() <= 0) throw Error(Errc::ZeroEntry, "matrix has a zero entry");
  // F = diag(r) ((1-tau) I + tau/m J) keeps row sums; S = F^{-1} M stays positive for small tau.
  const Vector r = M.rowwise().sum();
  const Matrix S0 = r.cwiseInverse().asDiagonal() * M;
  const Vector mean = S0.colwise().mean().transpose();
  double ratio = 1.0;
  for (Eigen::Index i = 0; i < S0.rows(); ++i)
    for (Eigen::Index j = 0; j < S0.cols(); ++j) ratio = std::min(ratio, S0(i, j) / mean(j));
  const double tau = 0.5 * ratio;
  Factorization f;
  f.F = r.asDiagonal() * ((1 - tau) * Matrix::Identity(m, m) + (tau / m) * Matrix::Ones(m, m));
  f.S = (S0 - tau * Vector::Ones(m) * mean.transpose()) / (1 - tau);
  for (Eigen::Index i = 0; i < f.S.rows(); ++i) f.S.row(i) /= f.S.row(i).sum();
  return f;
}

ConstructionResult positive_witness(const JointDistribution& Mj, const ConstructionConfig& cfg) {
  check_config(cfg);
  const Matrix& M = Mj.p;
  if (M.minCoeff() <= cfg.zeroTol) throw Error(Errc::ZeroEntry, "matrix has a zero entry");
  if (mutual_information(M) <= cfg.stepTol) return finish(DerivationWitness{M, {}, cfg.stepTol}, M, cfg.stepTol);
  const Eigen::Index m = M.rows(), n = M.cols();
  const Eigen::Index rank = Eigen::FullPivLU<Matrix>(M).rank();
  if (m < n && rank == m) {
    ConstructionResult t = positive_witness(JointDistribution{M.transpose()}, cfg);
    return finish(transpose_witness(t.witness), M, cfg.stepTol);
  }
  // Candidate factorizations M = F S, most evenly proportioned F first.
  std::vector<Factorization> cands;
  if (m == n && inverse_condition(M) >= 1e-8) cands.push_back({M, Matrix::Identity(n, n)});
  if (m > n && rank == n) cands.push_back(tall_factorization(M));
  cands.push_back(mixing_factorization(M));
  auto spread = [](const Matrix& F) {
    const Vector r = F.rowwise().sum(), c = F.colwise().sum().transpose();
    return (F.array() / (r * c.transpose()).array()).minCoeff();
  };
  std::stable_sort(cands.begin(), cands.end(),
                   [&](const Factorization& x, const Factorization& y) { return spread(x.F) > spread(y.F); });
  for (std::size_t k = 0;; ++k) {
    try {
      const PositiveFactorResult inner = positive_nonsingular_witness(JointDistribution{cands[k].F}, cfg);
      return finish(stochastic_lift(inner.result.witness, Matrix::Identity(m, m), cands[k].S), M, cfg.stepTol);
    } catch (const Error& e) {
      if (k + 1 == cands.size() || (e.code() != Errc::NoConvergence && e.code() != Errc::SingularM)) throw;
    }
  }
}

// ---- composition of blocks -------------------------------------------------

DerivationWitness block_compose(const std::vector<std::vector<Matrix>>& grid, const DerivationWitness& pw) {
  const int G = static_cast<int>(grid.size());
  if (G == 0 || grid.front().empty()) throw Error(Errc::ShapeMismatch, "empty grid");
  const int H = static_cast<int>(grid.front().size());
  const Eigen::Index m = grid[0][0].rows(), n = grid[0][0].cols();
  if (pw.base.rows() != G || pw.base.cols() != H) throw Error(Errc::ShapeMismatch, "grid does not match pWitness");
  Matrix mass(G, H);
  double total = 0;
  for (int i = 0; i < G; ++i) {
    if (static_cast<int>(grid[i].size()) != H) throw Error(Errc::ShapeMismatch, "ragged grid");
    for (int j = 0; j < H; ++j) {
      const Matrix& b = grid[i][j];
      if (b.rows() != m || b.cols() != n) throw Error(Errc::ShapeMismatch, "blocks differ in shape");
      if (b.minCoeff() < 0) throw Error(Errc::NegativeEntry, "negative block entry");
      mass(i, j) = b.sum();
      total += mass(i, j);
    }
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(Errc::MassMismatch, "blocks do not carry total mass 1");
  for (int i = 0; i < G; ++i) {
    Matrix row = Matrix::Zero(m, n);
    for (int j = 0; j < H; ++j) row += grid[i][j];
    if (!is_rank1(row, 1e-9)) throw Error(Errc::RowColNotRank1, "row " + std::to_string(i) + " sums to rank > 1");
  }
  for (int j = 0; j < H; ++j) {
    Matrix col = Matrix::Zero(m, n);
    for (int i = 0; i < G; ++i) col += grid[i][j];
    if (!is_rank1(col, 1e-9)) throw Error(Errc::RowColNotRank1, "column " + std::to_string(j) + " sums to rank > 1");
  }
  const double slack = std::max(1e-9, 10 * pw.tol);
  for (int i = 0; i < G; ++i)
    for (int j = 0; j < H; ++j)
      if (std::abs(mass(i, j) - pw.base(i, j)) > slack || (mass(i, j) == 0) != (pw.base(i, j) == 0))
        throw Error(Errc::MassMismatch, "block masses differ from the inner witness base");

  // Pr(a, b, a* = i, b* = j) = N_ij(a, b), with N_ij rescaled to the inner base.
  QuadJoint step = QuadJoint::dense({static_cast<int>(m), static_cast<int>(n), G, H},
                                    std::vector<double>(static_cast<std::size_t>(m) * n * G * H, 0.0));
  DerivationWitness out{Matrix::Zero(m, n), {}, pw.tol};
  for (int i = 0; i < G; ++i)
    for (int j = 0; j < H; ++j) {
      if (mass(i, j) == 0) continue;
      const Matrix b = grid[i][j] * (pw.base(i, j) / mass(i, j));
      out.base += b;
      for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index c = 0; c < n; ++c) step.t[step.index(a, c, i, j)] = b(a, c);
    }
  out.steps.push_back(std::move(step));
  out.steps.insert(out.steps.end(), pw.steps.begin(), pw.steps.end());
  return out;
}

// ---- non-block matrices ------------------------------------------------------

// Every level merges neighbouring groups and drops one summand, so the final
// size is a binomially weighted sum of the part counts.
int predicted_grid(const std::vector<int>& parts) {
  std::vector<int> p = parts;
  while (p.size() > 2) {
    std::vector<int> q;
    for (std::size_t l = 0; l + 1 < p.size(); ++l) q.push_back(p[l] + p[l + 1]);
    p = std::move(q);
  }
  return std::accumulate(p.begin(), p.end(), 0);
}

RDecomposition grid_decomposition(const Matrix& M, double zeroTol, int maxLength) {
  const int R = static_cast<int>(M.rows()), C = static_cast<int>(M.cols());
  if (R * C > 16) throw Error(Errc::TooLarge, "decomposition search needs rows*cols <= 16");
  if (auto split = block_split(M, zeroTol)) throw BlockError(*split, "block matrix has no r-decomposition");
  auto bit = [&](int i, int j) { return std::uint32_t{1} << (i * C + j); };
  std::uint32_t full = 0;
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j)
      if (M(i, j) > zeroTol) full |= bit(i, j);

  struct Cand {
    std::uint32_t mask;
    int parts;
  };
  std::vector<Cand> cands;
  auto add = [&](int rs, int cs) {
    if (!rs || !cs) return;
    std::uint32_t mask = 0;
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < C; ++j)
        if ((rs >> i & 1) && (cs >> j & 1)) mask |= bit(i, j);
    if ((mask & full) != mask) return;
    const int parts = std::min(std::popcount(static_cast<unsigned>(rs)), std::popcount(static_cast<unsigned>(cs)));
    for (const Cand& c : cands)
      if (c.mask == mask) return;
    cands.push_back({mask, parts});
  };
  // Row-maximal: a row set with all columns supported on every row; likewise for columns.
  for (int rs = 1; rs < (1 << R); ++rs) {
    int cs = (1 << C) - 1;
    for (int i = 0; i < R; ++i)
      if (rs >> i & 1)
        for (int j = 0; j < C; ++j)
          if (!(full & bit(i, j))) cs &= ~(1 << j);
    add(rs, cs);
  }
  for (int cs = 1; cs < (1 << C); ++cs) {
    int rs = (1 << R) - 1;
    for (int j = 0; j < C; ++j)
      if (cs >> j & 1)
        for (int i = 0; i < R; ++i)
          if (!(full & bit(i, j))) rs &= ~(1 << i);
    add(rs, cs);
  }

  std::vector<int> best, cur;
  int bestCost = std::numeric_limits<int>::max();
  std::vector<int> counts;
  std::function<void(std::uint32_t)> dfs = [&](std::uint32_t covered) {
    if (covered == full) {
      const int cost = predicted_grid(counts);
      if (cost < bestCost || (cost == bestCost && cur.size() < best.size())) {
        bestCost = cost;
        best = cur;
      }
      return;
    }
    if (static_cast<int>(cur.size()) >= maxLength) return;
    for (int k = 0; k < static_cast<int>(cands.size()); ++k) {
      if (!cur.empty() && (k == cur.back() || !(cands[k].mask & cands[cur.back()].mask))) continue;
      if (!(cands[k].mask & ~covered)) continue;
      counts.push_back(cands[k].parts);
      cur.push_back(k);
      // Every count enters the final size with weight >= 1.
      if (std::accumulate(counts.begin(), counts.end(), 0) < bestCost) dfs(covered | cands[k].mask);
      cur.pop_back();
      counts.pop_back();
    }
  };
  dfs(0);
  if (best.empty()) return merge_consecutive(r_decomposition(M, zeroTol), false, zeroTol);

  // Each cell's mass is shared evenly by the rectangles covering it.
  Matrix cover = Matrix::Zero(R, C);
  for (int k : best)
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < C; ++j)
        if (cands[k].mask & bit(i, j)) cover(i, j) += 1;
  RDecomposition d;
  for (int k : best) {
    Matrix s = Matrix::Zero(R, C);
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < C; ++j)
        if (cands[k].mask & bit(i, j)) s(i, j) = M(i, j) / cover(i, j);
    d.summands.push_back(std::move(s));
  }
  return d;
}

namespace {

using Parts = std::vector<std::vector<Matrix>>;  // rank-1 parts of each summand

Parts split_all(const std::vector<Matrix>& summands) {
  Parts parts;
  for (const Matrix& s : summands) parts.push_back(rank1_split_compact(s));
  return parts;
}

int grid_of(const Parts& parts) {
  std::vector<int> p;
  for (const auto& v : parts) p.push_back(static_cast<int>(v.size()));
  return cind::predicted_grid(p);
}

struct Level {
  std::vector<std::vector<Matrix>> grid;
  Matrix P;
  std::vector<Matrix> next;  // r-decomposition of P along the groups
};

// Block-diagonal grid of the rank-1 parts plus single-cell perturbations that
// couple every pair of parts of consecutive summands at a shared cell.
Level build_level(const Matrix& M, const Parts& parts, double scale) {
  const int L = static_cast<int>(parts.size());
  std::vector<int> first(L + 1, 0);
  for (int l = 0; l < L; ++l) first[l + 1] = first[l] + static_cast<int>(parts[l].size());
  const int g = first[L];
  std::vector<const Matrix*> part(g);
  for (int l = 0; l < L; ++l)
    for (std::size_t k = 0; k < parts[l].size(); ++k) part[first[l] + k] = &parts[l][k];

  Level lv;
  lv.grid.assign(g, std::vector<Matrix>(g, Matrix::Zero(M.rows(), M.cols())));
  for (int u = 0; u < g; ++u) lv.grid[u][u] = *part[u];

  // Couple every pair within a group at the cell where both parts are
  // heaviest. Row and column sums of the grid stay equal to the parts.
  std::vector<std::pair<int, int>> pairs;
  for (int l = 0; l + 1 < L; ++l)
    for (int u = first[l]; u < first[l + 2]; ++u)
      for (int v = u + 1; v < first[l + 2]; ++v) pairs.emplace_back(u, v);
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  std::vector<int> deg(g, 0);
  for (auto [u, v] : pairs) ++deg[u], ++deg[v];
  const double s = scale;
  for (auto [u, v] : pairs) {
    double best = 0;
    Eigen::Index bi = 0, bj = 0;
    for (Eigen::Index i = 0; i < M.rows(); ++i)
      for (Eigen::Index j = 0; j < M.cols(); ++j) {
        const double mn = std::min((*part[u])(i, j) / deg[u], (*part[v])(i, j) / deg[v]);
        if (mn > best) {
          best = mn;
          bi = i;
          bj = j;
        }
      }
    if (!(best > 0)) continue;
    // Each part gives away at most s times its entry at any one cell.
    const double e = s * best;
    lv.grid[u][u](bi, bj) -= e;
    lv.grid[v][v](bi, bj) -= e;
    lv.grid[u][v](bi, bj) += e;
    lv.grid[v][u](bi, bj) += e;
  }
  lv.P = Matrix(g, g);
  for (int u = 0; u < g; ++u)
    for (int v = 0; v < g; ++v) lv.P(u, v) = lv.grid[u][v].sum();

  // Summands of P: the group squares, shared cells split evenly.
  Matrix count = Matrix::Zero(g, g);
  for (int l = 0; l + 1 < L; ++l)
    count.block(first[l], first[l], first[l + 2] - first[l], first[l + 2] - first[l]).array() += 1;
  for (int l = 0; l + 1 < L; ++l) {
    Matrix q = Matrix::Zero(g, g);
    const int a = first[l], w = first[l + 2] - first[l];
    q.block(a, a, w, w) = lv.P.block(a, a, w, w).cwiseQuotient(count.block(a, a, w, w));
    lv.next.push_back(std::move(q));
  }
  return lv;
}

DerivationWitness derive_rec(const Matrix& M, const ConstructionConfig& cfg, const std::vector<Matrix>* hint,
                             int depth) {
  if (depth > cfg.maxOrder) throw Error(Errc::OrderCapExceeded, "recursion deeper than maxOrder");

  // Zero rows and columns are carried by an injective relabelling.
  std::vector<int> rs, cs;
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    if (M.row(i).maxCoeff() > cfg.zeroTol) rs.push_back(static_cast<int>(i));
  for (Eigen::Index j = 0; j < M.cols(); ++j)
    if (M.col(j).maxCoeff() > cfg.zeroTol) cs.push_back(static_cast<int>(j));
  if (rs.size() < static_cast<std::size_t>(M.rows()) || cs.size() < static_cast<std::size_t>(M.cols())) {
    auto shrink = [&](const Matrix& x) {
      Matrix s(rs.size(), cs.size());
      for (std::size_t i = 0; i < rs.size(); ++i)
        for (std::size_t j = 0; j < cs.size(); ++j) s(i, j) = x(rs[i], cs[j]);
      return s;
    };
    std::vector<Matrix> sub;
    if (hint)
      for (const Matrix& h : *hint) sub.push_back(shrink(h));
    const DerivationWitness w = derive_rec(shrink(M), cfg, hint ? &sub : nullptr, depth);
    return map_witness(w, rs, cs, static_cast<int>(M.rows()), static_cast<int>(M.cols()));
  }

  if (mutual_information(M) <= cfg.stepTol) return DerivationWitness{M, {}, cfg.stepTol};
  if (M.minCoeff() > cfg.zeroTol) {
    if (M.rows() > cfg.maxGrid || M.cols() > cfg.maxGrid)
      throw Error(Errc::TooLarge, "positive matrix larger than maxGrid");
    return positive_witness(JointDistribution{M}, cfg).witness;
  }

  Parts parts;
  if (hint) {
    parts = split_all(*hint);
  } else {
    const RDecomposition d = M.size() <= 16 ? grid_decomposition(M, cfg.zeroTol)
                                            : merge_consecutive(r_decomposition(M, cfg.zeroTol), false, cfg.zeroTol);
    parts = split_all(d.summands);
  }
  if (grid_of(parts) > cfg.maxGrid)
    throw Error(Errc::TooLarge, "decomposition needs a grid of " + std::to_string(grid_of(parts)) +
                                    " > maxGrid parts");
  if (parts.size() == 1) return positive_witness(JointDistribution{M}, cfg).witness;

  const Level lv = build_level(M, parts, cfg.perturbScale);
  const DerivationWitness inner = derive_rec(lv.P, cfg, &lv.next, depth + 1);
  return block_compose(lv.grid, inner);
}

}  // namespace

ConstructionResult derive_nonblock(const JointDistribution& M, const ConstructionConfig& cfg) {
  check_config(cfg);
  if (auto split = block_split(M.p, cfg.zeroTol)) throw BlockError(*split, "block matrix is not conditionally independent");
  try {
    DerivationWitness w = derive_rec(M.p, cfg, nullptr, 0);
    if (w.order() > cfg.maxOrder) throw Error(Errc::OrderCapExceeded, "witness order exceeds maxOrder");
    return finish(std::move(w), M.p, cfg.stepTol);
  } catch (const Error& e) {
    const Errc c = e.code();
    if (!cfg.smoothFallback || (c != Errc::NoConvergence && c != Errc::OrderCapExceeded && c != Errc::TooLarge)) throw;
  }
  // TV((1-l) M + l r c^T, M) = l TV(M, r c^T).
  const Vector r = M.p.rowwise().sum(), c = M.p.colwise().sum().transpose();
  const Matrix indep = r * c.transpose();
  const double lambda = std::min(0.5, 0.5 * cfg.delta / std::max(total_variation(M.p, indep), 1e-300));
  const Matrix S = (1 - lambda) * M.p + lambda * indep;
  DerivationWitness w = positive_witness(JointDistribution{S}, cfg).witness;
  if (w.order() > cfg.maxOrder) throw Error(Errc::OrderCapExceeded, "witness order exceeds maxOrder");
  return finish(std::move(w), M.p, cfg.stepTol);
}

}  // namespace cind
