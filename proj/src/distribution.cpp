#include "condind/distribution.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace cind {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::NegativeEntry: return "NegativeEntry";
    case Errc::SumNotOne: return "SumNotOne";
    case Errc::NotFinite: return "NotFinite";
    case Errc::BadAxis: return "BadAxis";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::InvalidCoupling: return "InvalidCoupling";
    case Errc::NotStochastic: return "NotStochastic";
    case Errc::EmptySupport: return "EmptySupport";
    case Errc::NotBlock: return "NotBlock";
    case Errc::IsBlock: return "IsBlock";
    case Errc::NotRMatrix: return "NotRMatrix";
    case Errc::DegeneratePositivity: return "DegeneratePositivity";
    case Errc::TooLarge: return "TooLarge";
    case Errc::NotIndependent: return "NotIndependent";
    case Errc::BadMap: return "BadMap";
    case Errc::OrderDecrease: return "OrderDecrease";
    case Errc::BadN: return "BadN";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::NotDyadic: return "NotDyadic";
    case Errc::SingularM: return "SingularM";
    case Errc::NonzeroSum: return "NonzeroSum";
    case Errc::ZeroEntry: return "ZeroEntry";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::RowColNotRank1: return "RowColNotRank1";
    case Errc::MassMismatch: return "MassMismatch";
    case Errc::OrderCapExceeded: return "OrderCapExceeded";
    case Errc::NegativeRate: return "NegativeRate";
    case Errc::EpsOutOfRange: return "EpsOutOfRange";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

namespace {

double clamp0(double v) { return (v < 0 && v > -kClampTol) ? 0.0 : v; }

}  // namespace

JointDistribution validate_distribution(const Matrix& grid, double sumTol) {
  if (grid.rows() < 1 || grid.cols() < 1) throw Error(Errc::ShapeMismatch, "empty grid");
  if (!grid.allFinite()) throw Error(Errc::NotFinite, "grid has non-finite entries");
  for (Eigen::Index i = 0; i < grid.rows(); ++i)
    for (Eigen::Index j = 0; j < grid.cols(); ++j)
      if (grid(i, j) < 0) {
        std::ostringstream os;
        os << "entry (" << i << "," << j << ") = " << grid(i, j);
        throw Error(Errc::NegativeEntry, os.str());
      }
  const double s = grid.sum();
  if (std::abs(s - 1.0) > sumTol) {
    std::ostringstream os;
    os.precision(17);
    os << "sum deviates from 1 by " << (s - 1.0);
    throw Error(Errc::SumNotOne, os.str());
  }
  return JointDistribution{grid};
}

JointDistribution normalize(const Matrix& grid) {
  if (!grid.allFinite()) throw Error(Errc::NotFinite, "grid has non-finite entries");
  if ((grid.array() < 0).any()) throw Error(Errc::NegativeEntry, "cannot normalize negative mass");
  const double s = grid.sum();
  if (!(s > 0)) throw Error(Errc::EmptySupport, "zero total mass");
  return JointDistribution{grid / s};
}

void check_stochastic(const Matrix& s, double tol) {
  if (!s.allFinite()) throw Error(Errc::NotFinite, "stochastic matrix has non-finite entries");
  if ((s.array() < 0).any()) throw Error(Errc::NotStochastic, "negative entry");
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    if (std::abs(s.row(i).sum() - 1.0) > tol)
      throw Error(Errc::NotStochastic, "row " + std::to_string(i) + " does not sum to 1");
}

Joint::Joint(std::vector<int> d, std::vector<double> v) : dims(std::move(d)), p(std::move(v)) {
  std::size_t n = 1;
  for (int k : dims) {
    if (k < 1) throw Error(Errc::BadAxis, "axis size must be positive");
    n *= static_cast<std::size_t>(k);
  }
  if (n != p.size()) throw Error(Errc::ShapeMismatch, "joint size does not match dims");
}

Joint Joint::from_matrix(const Matrix& m) {
  std::vector<double> v(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[i * m.cols() + j] = m(i, j);
  return Joint({static_cast<int>(m.rows()), static_cast<int>(m.cols())}, std::move(v));
}

Matrix Joint::as_matrix() const {
  if (dims.size() != 2) throw Error(Errc::BadAxis, "joint is not two-dimensional");
  Matrix m(dims[0], dims[1]);
  for (int i = 0; i < dims[0]; ++i)
    for (int j = 0; j < dims[1]; ++j) m(i, j) = p[static_cast<std::size_t>(i) * dims[1] + j];
  return m;
}

Joint marginal(const Joint& j, const std::vector<int>& keep) {
  const int r = static_cast<int>(j.dims.size());
  std::vector<bool> seen(r, false);
  std::vector<int> outDims;
  for (int a : keep) {
    if (a < 0 || a >= r || seen[a]) throw Error(Errc::BadAxis, "bad or repeated axis " + std::to_string(a));
    seen[a] = true;
    outDims.push_back(j.dims[a]);
  }
  // Stride of each input axis inside the output index.
  std::vector<std::size_t> outStride(r, 0);
  std::size_t s = 1;
  for (int k = static_cast<int>(keep.size()) - 1; k >= 0; --k) {
    outStride[keep[k]] = s;
    s *= static_cast<std::size_t>(j.dims[keep[k]]);
  }
  std::vector<double> out(s, 0.0);
  std::vector<int> idx(r, 0);
  std::size_t o = 0;
  for (double v : j.p) {
    out[o] += v;
    for (int a = r - 1; a >= 0; --a) {
      o += outStride[a];
      if (++idx[a] < j.dims[a]) break;
      o -= outStride[a] * static_cast<std::size_t>(j.dims[a]);
      idx[a] = 0;
    }
  }
  if (outDims.empty()) outDims.push_back(1);
  return Joint(std::move(outDims), std::move(out));
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0) h -= v * std::log2(v);
  return h < 0 ? 0.0 : h;
}

double entropy(const Vector& p) { return entropy(std::span<const double>(p.data(), static_cast<std::size_t>(p.size()))); }

double entropy(const Joint& j) { return entropy(std::span<const double>(j.p)); }

double conditional_entropy(const Matrix& xy) {
  const Vector y = xy.colwise().sum().transpose();
  // Joint entropy does not depend on storage order.
  return clamp0(entropy(std::span<const double>(xy.data(), static_cast<std::size_t>(xy.size()))) - entropy(y));
}

double mutual_information(const Matrix& xy) {
  const Vector x = xy.rowwise().sum();
  const Vector y = xy.colwise().sum().transpose();
  const double hxy = entropy(std::span<const double>(xy.data(), static_cast<std::size_t>(xy.size())));
  return clamp0(entropy(x) + entropy(y) - hxy);
}

double conditional_mutual_information(const Joint& xyz) {
  if (xyz.dims.size() != 3) throw Error(Errc::BadAxis, "need a joint over three axes");
  const double hxz = entropy(marginal(xyz, {0, 2}));
  const double hyz = entropy(marginal(xyz, {1, 2}));
  const double hz = entropy(marginal(xyz, {2}));
  return clamp0(hxz + hyz - entropy(xyz) - hz);
}

double total_variation(const Matrix& p, const Matrix& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols())
    throw Error(Errc::ShapeMismatch, "total variation of differently shaped matrices");
  return 0.5 * (p - q).cwiseAbs().sum();
}

GammaCoupling deterministic_gamma(int rows, int cols, const std::vector<int>& values, int range) {
  if (static_cast<int>(values.size()) != rows * cols) throw Error(Errc::ShapeMismatch, "gamma map size");
  GammaCoupling g{range, Matrix::Zero(rows * cols, range)};
  for (int c = 0; c < rows * cols; ++c) {
    if (values[c] < 0 || values[c] >= range) throw Error(Errc::InvalidCoupling, "gamma value out of range");
    g.q(c, values[c]) = 1.0;
  }
  return g;
}

Joint couple_gamma(const JointDistribution& j, const GammaCoupling& g) {
  const int m = j.rows(), n = j.cols();
  if (g.range < 1 || g.q.rows() != m * n || g.q.cols() != g.range)
    throw Error(Errc::ShapeMismatch, "coupling does not match the joint");
  for (int c = 0; c < m * n; ++c) {
    if ((g.q.row(c).array() < 0).any()) throw Error(Errc::InvalidCoupling, "negative conditional probability");
    if (std::abs(g.q.row(c).sum() - 1.0) > 1e-12)
      throw Error(Errc::InvalidCoupling, "conditional row " + std::to_string(c) + " does not sum to 1");
  }
  std::vector<double> v(static_cast<std::size_t>(m) * n * g.range);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < n; ++b)
      for (int k = 0; k < g.range; ++k)
        v[(static_cast<std::size_t>(a) * n + b) * g.range + k] = j.p(a, b) * g.q(a * n + b, k);
  return Joint({m, n, g.range}, std::move(v));
}

InfoReport info_report(const Joint& abg) {
  if (abg.dims.size() != 3) throw Error(Errc::BadAxis, "need a joint over (a,b,gamma)");
  const double h = entropy(abg);
  const double hab = entropy(marginal(abg, {0, 1}));
  const double ha = entropy(marginal(abg, {0}));
  const double hb = entropy(marginal(abg, {1}));
  const double hag = entropy(marginal(abg, {0, 2}));
  const double hbg = entropy(marginal(abg, {1, 2}));
  const double hg = entropy(marginal(abg, {2}));
  InfoReport r;
  r["H(g)"] = hg;
  r["H(g|a)"] = clamp0(hag - ha);
  r["H(g|b)"] = clamp0(hbg - hb);
  r["H(g|ab)"] = clamp0(h - hab);
  r["I(g:ab)"] = clamp0(hg + hab - h);
  r["I(g:a|b)"] = clamp0(hab + hbg - h - hb);
  r["I(g:b|a)"] = clamp0(hab + hag - h - ha);
  r["I(a:b)"] = clamp0(ha + hb - hab);
  return r;
}

}  // namespace cind
