#include "condind/witness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cind {

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

QuadJoint QuadJoint::dense(std::array<int, 4> dims, std::vector<double> t) {
  QuadJoint q;
  q.dims = dims;
  std::size_t n = 1;
  for (int d : dims) {
    if (d < 1) throw Error(Errc::ShapeMismatch, "step axis sizes must be positive");
    n *= static_cast<std::size_t>(d);
  }
  if (n != t.size()) throw Error(Errc::ShapeMismatch, "step tensor size does not match its dims");
  q.t = std::move(t);
  return q;
}

QuadJoint QuadJoint::product(const std::vector<QuadJoint>& parts) {
  std::vector<QuadJoint> flat;
  for (const QuadJoint& p : parts) {
    const auto& src = p.factored() ? p.factors : std::vector<QuadJoint>{p};
    for (const QuadJoint& f : src)
      if (!(f.entries() == 1 && f.t.size() == 1 && f.t[0] == 1.0)) flat.push_back(f);
  }
  if (flat.empty()) return dense({1, 1, 1, 1}, {1.0});
  if (flat.size() == 1) return flat.front();
  QuadJoint q;
  for (const QuadJoint& f : flat)
    for (int k = 0; k < 4; ++k) q.dims[k] *= f.dims[k];
  q.factors = std::move(flat);
  return q;
}

QuadJoint QuadJoint::constant_stars(const Matrix& p) {
  std::vector<double> t(static_cast<std::size_t>(p.size()));
  for (Eigen::Index a = 0; a < p.rows(); ++a)
    for (Eigen::Index b = 0; b < p.cols(); ++b) t[a * p.cols() + b] = p(a, b);
  return dense({static_cast<int>(p.rows()), static_cast<int>(p.cols()), 1, 1}, std::move(t));
}

std::size_t QuadJoint::entries() const {
  std::size_t n = 1;
  for (int d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

namespace {

QuadJoint dense_product(const QuadJoint& p, const QuadJoint& q) {
  std::array<int, 4> d;
  for (int k = 0; k < 4; ++k) d[k] = p.dims[k] * q.dims[k];
  QuadJoint out = QuadJoint::dense(d, std::vector<double>(p.entries() * q.entries(), 0.0));
  for (int a1 = 0; a1 < p.dims[0]; ++a1)
    for (int b1 = 0; b1 < p.dims[1]; ++b1)
      for (int x1 = 0; x1 < p.dims[2]; ++x1)
        for (int y1 = 0; y1 < p.dims[3]; ++y1) {
          const double v = p.t[p.index(a1, b1, x1, y1)];
          if (v == 0.0) continue;
          for (int a2 = 0; a2 < q.dims[0]; ++a2)
            for (int b2 = 0; b2 < q.dims[1]; ++b2)
              for (int x2 = 0; x2 < q.dims[2]; ++x2)
                for (int y2 = 0; y2 < q.dims[3]; ++y2)
                  out.t[out.index(a1 * q.dims[0] + a2, b1 * q.dims[1] + b2, x1 * q.dims[2] + x2,
                                  y1 * q.dims[3] + y2)] = v * q.t[q.index(a2, b2, x2, y2)];
        }
  return out;
}

double cmi_dense(const QuadJoint& q, bool givenA) {
  // Joint over (a, b, z) with z the kept starred axis.
  const int A = q.dims[0], B = q.dims[1], Z = givenA ? q.dims[2] : q.dims[3];
  std::vector<double> v(static_cast<std::size_t>(A) * B * Z, 0.0);
  for (int a = 0; a < A; ++a)
    for (int b = 0; b < B; ++b)
      for (int x = 0; x < q.dims[2]; ++x)
        for (int y = 0; y < q.dims[3]; ++y)
          v[(static_cast<std::size_t>(a) * B + b) * Z + (givenA ? x : y)] += q.t[q.index(a, b, x, y)];
  return conditional_mutual_information(Joint({A, B, Z}, std::move(v)));
}

}  // namespace

QuadJoint QuadJoint::materialize(std::size_t maxEntries) const {
  if (!factored()) return *this;
  if (entries() > maxEntries) throw Error(Errc::TooLarge, "step tensor too large to materialize");
  QuadJoint acc = factors.front();
  for (std::size_t k = 1; k < factors.size(); ++k) acc = dense_product(acc, factors[k]);
  return acc;
}

Matrix QuadJoint::ab_marginal() const {
  if (factored()) {
    Matrix m = factors.front().ab_marginal();
    for (std::size_t k = 1; k < factors.size(); ++k) m = kron(m, factors[k].ab_marginal());
    return m;
  }
  Matrix m = Matrix::Zero(dims[0], dims[1]);
  const std::size_t inner = static_cast<std::size_t>(dims[2]) * dims[3];
  for (int a = 0; a < dims[0]; ++a)
    for (int b = 0; b < dims[1]; ++b) {
      const std::size_t o = index(a, b, 0, 0);
      double s = 0;
      for (std::size_t k = 0; k < inner; ++k) s += t[o + k];
      m(a, b) = s;
    }
  return m;
}

Matrix QuadJoint::star_marginal() const {
  if (factored()) {
    Matrix m = factors.front().star_marginal();
    for (std::size_t k = 1; k < factors.size(); ++k) m = kron(m, factors[k].star_marginal());
    return m;
  }
  Matrix m = Matrix::Zero(dims[2], dims[3]);
  for (int a = 0; a < dims[0]; ++a)
    for (int b = 0; b < dims[1]; ++b)
      for (int x = 0; x < dims[2]; ++x)
        for (int y = 0; y < dims[3]; ++y) m(x, y) += t[index(a, b, x, y)];
  return m;
}

// For independent factors the conditional informations add up.
double QuadJoint::cmi_given_astar() const {
  if (!factored()) return cmi_dense(*this, true);
  double s = 0;
  for (const QuadJoint& f : factors) s += f.cmi_given_astar();
  return s;
}

double QuadJoint::cmi_given_bstar() const {
  if (!factored()) return cmi_dense(*this, false);
  double s = 0;
  for (const QuadJoint& f : factors) s += f.cmi_given_bstar();
  return s;
}

double QuadJoint::total() const {
  if (!factored()) {
    double s = 0;
    for (double v : t) s += v;
    return s;
  }
  double p = 1;
  for (const QuadJoint& f : factors) p *= f.total();
  return p;
}

double QuadJoint::min_entry() const {
  if (!factored()) return t.empty() ? 0.0 : *std::min_element(t.begin(), t.end());
  double p = 1;
  for (const QuadJoint& f : factors) {
    const double m = f.min_entry();
    if (m < 0) return m;
    p *= m;
  }
  return p;
}

namespace {

void visit_factors(const std::vector<QuadJoint>& fs, std::size_t k, std::array<int, 4> idx, double v,
                   const EntryFn& fn) {
  if (k == fs.size()) {
    fn(idx[0], idx[1], idx[2], idx[3], v);
    return;
  }
  const QuadJoint& f = fs[k];
  for (int a = 0; a < f.dims[0]; ++a)
    for (int b = 0; b < f.dims[1]; ++b)
      for (int x = 0; x < f.dims[2]; ++x)
        for (int y = 0; y < f.dims[3]; ++y) {
          const double w = f.t[f.index(a, b, x, y)];
          if (w == 0.0) continue;
          visit_factors(fs, k + 1,
                        {idx[0] * f.dims[0] + a, idx[1] * f.dims[1] + b, idx[2] * f.dims[2] + x,
                         idx[3] * f.dims[3] + y},
                        v * w, fn);
        }
}

}  // namespace

void for_each_nonzero(const QuadJoint& q, const EntryFn& fn) {
  if (q.factored()) {
    visit_factors(q.factors, 0, {0, 0, 0, 0}, 1.0, fn);
    return;
  }
  for (int a = 0; a < q.dims[0]; ++a)
    for (int b = 0; b < q.dims[1]; ++b)
      for (int x = 0; x < q.dims[2]; ++x)
        for (int y = 0; y < q.dims[3]; ++y)
          if (const double v = q.t[q.index(a, b, x, y)]; v != 0.0) fn(a, b, x, y, v);
}

Matrix DerivationWitness::final_pair() const { return steps.empty() ? base : steps.back().star_marginal(); }

double ValidationReport::max_cmi() const {
  double m = 0;
  for (const StepReport& s : perStep) m = std::max({m, s.cmiA, s.cmiB});
  return m;
}

namespace {

bool well_formed(const QuadJoint& q) {
  if (q.factored()) {
    for (const QuadJoint& f : q.factors)
      if (!well_formed(f)) return false;
    return true;
  }
  for (double v : q.t)
    if (!(v >= 0) || !std::isfinite(v)) return false;
  return std::abs(q.total() - 1.0) <= kMarginalTol;
}

void check_shapes(const DerivationWitness& w) {
  int r = static_cast<int>(w.base.rows()), c = static_cast<int>(w.base.cols());
  for (std::size_t k = 0; k < w.steps.size(); ++k) {
    const auto& d = w.steps[k].dims;
    if (d[0] != r || d[1] != c)
      throw Error(Errc::ShapeMismatch, "step " + std::to_string(k) + " does not match the previous pair");
    r = d[2];
    c = d[3];
  }
}

}  // namespace

ValidationReport validate_witness(const DerivationWitness& w, double tol) {
  check_shapes(w);
  ValidationReport rep;
  rep.tol = tol;
  bool ok = (w.base.array() >= 0).all() && std::abs(w.base.sum() - 1.0) <= kMarginalTol;
  Matrix prev = w.base;
  for (std::size_t k = 0; k < w.steps.size(); ++k) {
    const QuadJoint& q = w.steps[k];
    StepReport s;
    s.wellFormed = well_formed(q);
    s.cmiA = q.cmi_given_astar();
    s.cmiB = q.cmi_given_bstar();
    s.marginalTV = total_variation(q.ab_marginal(), prev);
    const bool stepOk = s.wellFormed && s.cmiA <= tol && s.cmiB <= tol && s.marginalTV <= kMarginalTol;
    if (!stepOk && rep.firstBadStep < 0) rep.firstBadStep = static_cast<int>(k);
    ok = ok && stepOk;
    rep.perStep.push_back(s);
    prev = q.star_marginal();
  }
  rep.finalMI = mutual_information(prev);
  rep.verdict = ok && rep.finalMI <= tol;
  return rep;
}

DerivationWitness independent_witness(const JointDistribution& j, double tol) {
  const double mi = mutual_information(j.p);
  if (mi > tol) throw Error(Errc::NotIndependent, "mutual information " + std::to_string(mi) + " exceeds tol");
  return DerivationWitness{j.p, {}, tol};
}

DerivationWitness map_witness(const DerivationWitness& w, const std::vector<int>& f, const std::vector<int>& g,
                              int rowsOut, int colsOut) {
  if (static_cast<Eigen::Index>(f.size()) != w.base.rows() || static_cast<Eigen::Index>(g.size()) != w.base.cols())
    throw Error(Errc::BadMap, "map is not defined on every row/column");
  for (const auto* m : {&f, &g})
    for (int v : *m)
      if (v < 0) throw Error(Errc::BadMap, "negative map value");
  const int R = rowsOut > 0 ? rowsOut : *std::max_element(f.begin(), f.end()) + 1;
  const int C = colsOut > 0 ? colsOut : *std::max_element(g.begin(), g.end()) + 1;
  for (int v : f)
    if (v >= R) throw Error(Errc::BadMap, "row map value out of range");
  for (int v : g)
    if (v >= C) throw Error(Errc::BadMap, "column map value out of range");

  DerivationWitness out{Matrix::Zero(R, C), w.steps, w.tol};
  for (Eigen::Index a = 0; a < w.base.rows(); ++a)
    for (Eigen::Index b = 0; b < w.base.cols(); ++b) out.base(f[a], g[b]) += w.base(a, b);
  if (w.steps.empty()) return out;

  const QuadJoint& s = w.steps.front();
  const std::size_t n = static_cast<std::size_t>(R) * C * s.dims[2] * s.dims[3];
  if (n > (std::size_t{1} << 26)) throw Error(Errc::TooLarge, "mapped step tensor too large");
  QuadJoint m = QuadJoint::dense({R, C, s.dims[2], s.dims[3]}, std::vector<double>(n, 0.0));
  for_each_nonzero(s, [&](int a, int b, int x, int y, double v) { m.t[m.index(f[a], g[b], x, y)] += v; });
  out.steps.front() = std::move(m);
  return out;
}

DerivationWitness pad_witness(const DerivationWitness& w, int order) {
  if (order < w.order()) throw Error(Errc::OrderDecrease, "cannot pad to a smaller order");
  DerivationWitness out = w;
  if (order == w.order()) return out;
  out.steps.push_back(QuadJoint::constant_stars(w.final_pair()));
  while (out.order() < order) out.steps.push_back(QuadJoint::dense({1, 1, 1, 1}, {1.0}));
  return out;
}

DerivationWitness product_witness(const DerivationWitness& w1, const DerivationWitness& w2) {
  const int k = std::max(w1.order(), w2.order());
  const DerivationWitness p1 = pad_witness(w1, k), p2 = pad_witness(w2, k);
  DerivationWitness out{kron(p1.base, p2.base), {}, std::max(w1.tol, w2.tol)};
  for (int s = 0; s < k; ++s) out.steps.push_back(QuadJoint::product({p1.steps[s], p2.steps[s]}));
  return out;
}

DerivationWitness power_witness(const DerivationWitness& w, int n) {
  if (n < 1) throw Error(Errc::BadN, "power needs n >= 1");
  DerivationWitness out = w;
  for (int i = 1; i < n; ++i) out = product_witness(out, w);
  return out;
}

namespace {

QuadJoint transpose_step(const QuadJoint& q) {
  if (q.factored()) {
    std::vector<QuadJoint> fs;
    for (const QuadJoint& f : q.factors) fs.push_back(transpose_step(f));
    return QuadJoint::product(fs);
  }
  QuadJoint o = QuadJoint::dense({q.dims[1], q.dims[0], q.dims[3], q.dims[2]}, std::vector<double>(q.t.size()));
  for (int a = 0; a < q.dims[0]; ++a)
    for (int b = 0; b < q.dims[1]; ++b)
      for (int x = 0; x < q.dims[2]; ++x)
        for (int y = 0; y < q.dims[3]; ++y) o.t[o.index(b, a, y, x)] = q.t[q.index(a, b, x, y)];
  return o;
}

}  // namespace

DerivationWitness transpose_witness(const DerivationWitness& w) {
  DerivationWitness out{w.base.transpose(), {}, w.tol};
  for (const QuadJoint& q : w.steps) out.steps.push_back(transpose_step(q));
  return out;
}

}  // namespace cind
