#include "condind/structure.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <numeric>

namespace cind {

bool SupportPattern::contains(int i, int j) const {
  return std::binary_search(cells.begin(), cells.end(), std::make_pair(i, j));
}

SupportPattern support_pattern(const Matrix& m, double zeroTol) {
  SupportPattern s{static_cast<int>(m.rows()), static_cast<int>(m.cols()), {}};
  for (int i = 0; i < s.rows; ++i)
    for (int j = 0; j < s.cols; ++j)
      if (m(i, j) > zeroTol) s.cells.emplace_back(i, j);
  return s;
}

std::optional<BlockSplit> block_split(const Matrix& m, double zeroTol) {
  const SupportPattern s = support_pattern(m, zeroTol);
  if (s.cells.empty()) throw Error(Errc::EmptySupport, "matrix has no support");
  const int R = s.rows, C = s.cols;
  // Union-find over rows [0,R) and columns [R,R+C).
  std::vector<int> parent(R + C);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  std::vector<bool> live(R + C, false);
  for (auto [i, j] : s.cells) {
    live[i] = live[R + j] = true;
    parent[find(i)] = find(R + j);
  }
  const int root = find(s.cells.front().first);  // smallest supported row
  bool connected = true;
  for (int v = 0; v < R + C; ++v)
    if (live[v] && find(v) != root) connected = false;
  if (connected) return std::nullopt;
  BlockSplit b;
  for (int i = 0; i < R; ++i) (live[i] && find(i) == root ? b.I1 : b.I2).push_back(i);
  for (int j = 0; j < C; ++j) (live[R + j] && find(R + j) == root ? b.J1 : b.J2).push_back(j);
  return b;
}

bool rectangle_support(const SupportPattern& s) {
  if (s.cells.empty()) return false;
  std::vector<int> rs, cs;
  for (auto [i, j] : s.cells) {
    rs.push_back(i);
    cs.push_back(j);
  }
  std::sort(rs.begin(), rs.end());
  rs.erase(std::unique(rs.begin(), rs.end()), rs.end());
  std::sort(cs.begin(), cs.end());
  cs.erase(std::unique(cs.begin(), cs.end()), cs.end());
  return rs.size() * cs.size() == s.cells.size();
}

bool is_r_matrix(const Matrix& m, double zeroTol) { return rectangle_support(support_pattern(m, zeroTol)); }

RDecomposition r_decomposition(const Matrix& m, double zeroTol) {
  if (auto split = block_split(m, zeroTol)) throw BlockError(*split, "block matrix has no r-decomposition");
  const SupportPattern s = support_pattern(m, zeroTol);
  if (rectangle_support(s)) return {{m}};

  // Cells are vertices; two cells are adjacent when they share a row or a column.
  const int V = static_cast<int>(s.cells.size());
  std::vector<bool> seen(V, false);
  std::vector<int> walk;
  std::function<void(int)> dfs = [&](int v) {
    seen[v] = true;
    walk.push_back(v);
    for (int u = 0; u < V; ++u) {
      if (seen[u]) continue;
      if (s.cells[u].first != s.cells[v].first && s.cells[u].second != s.cells[v].second) continue;
      dfs(u);
      walk.push_back(v);
    }
  };
  dfs(0);
  // Backtracking after the last first visit adds nothing.
  std::vector<bool> first(V, false);
  std::size_t cut = 0;
  for (std::size_t t = 0; t < walk.size(); ++t)
    if (!first[walk[t]]) {
      first[walk[t]] = true;
      cut = t;
    }
  walk.resize(cut + 1);

  std::vector<int> incidences(V, 0);
  for (std::size_t t = 0; t + 1 < walk.size(); ++t) {
    ++incidences[walk[t]];
    ++incidences[walk[t + 1]];
  }
  RDecomposition d;
  for (std::size_t t = 0; t + 1 < walk.size(); ++t) {
    Matrix e = Matrix::Zero(m.rows(), m.cols());
    for (int v : {walk[t], walk[t + 1]}) {
      auto [i, j] = s.cells[v];
      e(i, j) = m(i, j) / incidences[v];
    }
    d.summands.push_back(std::move(e));
  }
  return d;
}

namespace {

bool single_line(const SupportPattern& s) {
  bool row = true, col = true;
  for (auto [i, j] : s.cells) {
    row = row && i == s.cells.front().first;
    col = col && j == s.cells.front().second;
  }
  return row || col;
}

}  // namespace

RDecomposition merge_consecutive(const RDecomposition& d, bool keepRank1, double zeroTol) {
  RDecomposition out;
  if (d.summands.empty()) return out;
  if (keepRank1) {
    Matrix cur = d.summands.front();
    for (std::size_t k = 1; k < d.summands.size(); ++k) {
      const Matrix cand = cur + d.summands[k];
      const SupportPattern s = support_pattern(cand, zeroTol);
      if (rectangle_support(s) && single_line(s)) {
        cur = cand;
      } else {
        out.summands.push_back(cur);
        cur = d.summands[k];
      }
    }
    out.summands.push_back(cur);
    return out;
  }

  // Grow each group while the rectangle spanned by its rows and columns stays
  // inside the support; the mass of a cell is then shared evenly by the
  // rectangles covering it.
  Matrix total = Matrix::Zero(d.summands.front().rows(), d.summands.front().cols());
  for (const Matrix& m : d.summands) total += m;
  const auto inside = (total.array() > zeroTol);
  using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
  auto span = [&](const Mask& cells) {
    const auto rows = cells.rowwise().any();
    const auto cols = cells.colwise().any();
    Mask r(cells.rows(), cells.cols());
    for (Eigen::Index i = 0; i < r.rows(); ++i)
      for (Eigen::Index j = 0; j < r.cols(); ++j) r(i, j) = rows(i) && cols(j);
    return r;
  };
  std::vector<Mask> rects;
  Mask cur = d.summands.front().array() > zeroTol;
  for (std::size_t k = 1; k < d.summands.size(); ++k) {
    const Mask next = d.summands[k].array() > zeroTol;
    const Mask cand = span(cur || next);
    if ((cand && !inside).any()) {
      rects.push_back(span(cur));
      cur = next;
    } else {
      cur = cand;
    }
  }
  rects.push_back(span(cur));
  Matrix count = Matrix::Zero(total.rows(), total.cols());
  for (const Mask& r : rects) count += r.cast<double>().matrix();
  for (const Mask& r : rects) out.summands.push_back((total.array() * r.cast<double>() / count.array().max(1.0)).matrix());
  return out;
}

int r_complexity_bound(const JointDistribution& j, double zeroTol) {
  return static_cast<int>(merge_consecutive(r_decomposition(j, zeroTol), false, zeroTol).summands.size());
}

std::optional<int> exact_r_complexity(const JointDistribution& j, int limit, double zeroTol) {
  const int R = j.rows(), C = j.cols();
  if (R * C > 12) throw Error(Errc::TooLarge, "exhaustive search needs rows*cols <= 12");
  if (auto split = block_split(j.p, zeroTol)) throw BlockError(*split, "block matrix has no r-decomposition");
  const SupportPattern s = support_pattern(j.p, zeroTol);
  auto bit = [&](int i, int k) { return std::uint32_t{1} << (i * C + k); };
  std::uint32_t full = 0;
  for (auto [i, k] : s.cells) full |= bit(i, k);

  // Any covering chain of rectangles inside the support carries positive masses
  // (split each cell evenly among the rectangles covering it), and enlarging a
  // rectangle keeps both coverage and intersections, so maximal ones suffice.
  std::vector<std::uint32_t> rects;
  for (int rs = 1; rs < (1 << R); ++rs)
    for (int cs = 1; cs < (1 << C); ++cs) {
      std::uint32_t mask = 0;
      bool ok = true;
      for (int i = 0; i < R && ok; ++i)
        for (int k = 0; k < C && ok; ++k)
          if ((rs >> i & 1) && (cs >> k & 1)) {
            if (!(full & bit(i, k))) ok = false;
            mask |= bit(i, k);
          }
      if (ok) rects.push_back(mask);
    }
  std::vector<std::uint32_t> maximal;
  for (auto a : rects) {
    bool dominated = false;
    for (auto b : rects)
      if (a != b && (a & b) == a) dominated = true;
    if (!dominated) maximal.push_back(a);
  }
  std::sort(maximal.begin(), maximal.end());
  maximal.erase(std::unique(maximal.begin(), maximal.end()), maximal.end());

  // Breadth-first search over (last rectangle, covered cells).
  std::map<std::pair<int, std::uint32_t>, int> dist;
  std::deque<std::pair<int, std::uint32_t>> queue;
  for (int r = 0; r < static_cast<int>(maximal.size()); ++r) {
    if (maximal[r] == full) return limit >= 1 ? std::optional<int>(1) : std::nullopt;
    dist[{r, maximal[r]}] = 1;
    queue.emplace_back(r, maximal[r]);
  }
  while (!queue.empty()) {
    auto [r, cov] = queue.front();
    queue.pop_front();
    const int d = dist[{r, cov}];
    if (d >= limit) continue;
    for (int q = 0; q < static_cast<int>(maximal.size()); ++q) {
      if (!(maximal[q] & maximal[r])) continue;
      const std::uint32_t nc = cov | maximal[q];
      if (nc == full) return d + 1;
      if (dist.emplace(std::make_pair(q, nc), d + 1).second) queue.emplace_back(q, nc);
    }
  }
  return std::nullopt;
}

bool is_rank1(const Matrix& m, double relTol) {
  if (m.rows() < 2 || m.cols() < 2) return true;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector sv = svd.singularValues();
  return sv(0) == 0.0 || sv(1) <= relTol * sv(0);
}

namespace {

struct Rect {
  std::vector<int> rows, cols;
};

Rect rect_of(const Matrix& r) {
  const SupportPattern s = support_pattern(r);
  if (!rectangle_support(s)) throw Error(Errc::NotRMatrix, "support is not a rectangle");
  Rect x;
  for (auto [i, j] : s.cells) {
    x.rows.push_back(i);
    x.cols.push_back(j);
  }
  for (auto* v : {&x.rows, &x.cols}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  return x;
}

Matrix restrict(const Matrix& r, const Rect& x) {
  Matrix s(x.rows.size(), x.cols.size());
  for (std::size_t a = 0; a < x.rows.size(); ++a)
    for (std::size_t b = 0; b < x.cols.size(); ++b) s(a, b) = r(x.rows[a], x.cols[b]);
  return s;
}

Matrix embed(const Vector& u, const Vector& v, const Rect& x, Eigen::Index R, Eigen::Index C) {
  Matrix out = Matrix::Zero(R, C);
  for (std::size_t a = 0; a < x.rows.size(); ++a)
    for (std::size_t b = 0; b < x.cols.size(); ++b) out(x.rows[a], x.cols[b]) = u(a) * v(b);
  return out;
}

}  // namespace

std::vector<Matrix> rank1_split(const Matrix& r, int maxHalvings) {
  const Rect x = rect_of(r);
  const Matrix s = restrict(r, x);
  const int p = static_cast<int>(s.rows()), q = static_cast<int>(s.cols());
  if (p == 1 || q == 1 || is_rank1(s)) return {r};
  // Basis u_i = e_i + eps*1, v_j = e_j + eps*1; s = U C V^T.
  double eps = 0.25;
  for (int h = 0; h <= maxHalvings; ++h, eps /= 2) {
    const Matrix U = Matrix::Identity(p, p) + eps * Matrix::Ones(p, p);
    const Matrix V = Matrix::Identity(q, q) + eps * Matrix::Ones(q, q);
    const Matrix c = U.partialPivLu().solve(V.partialPivLu().solve(s.transpose()).transpose());
    if ((c.array() <= 0).any()) continue;
    std::vector<Matrix> parts;
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < q; ++j)
        parts.push_back(c(i, j) * embed(U.col(i), V.col(j), x, r.rows(), r.cols()));
    return parts;
  }
  throw Error(Errc::DegeneratePositivity, "no eps in the schedule gives positive coefficients");
}

std::vector<Matrix> rank1_split_compact(const Matrix& r) {
  const Rect x = rect_of(r);
  const Matrix s = restrict(r, x);
  if (s.rows() == 1 || s.cols() == 1 || is_rank1(s)) return {r};
  const bool flip = s.rows() < s.cols();
  const Matrix t = flip ? Matrix(s.transpose()) : s;  // t has at least as many rows as columns
  // t = K * B0 with B0 = (1-theta) I + theta 1 c^T, K = (t - theta r c^T)/(1-theta) > 0.
  const Vector rs = t.rowwise().sum();
  const Vector c = t.colwise().sum().transpose() / t.sum();
  double ratio = 1.0;
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j) ratio = std::min(ratio, t(i, j) / (rs(i) * c(j)));
  const double theta = 0.5 * ratio;
  const Matrix K = (t - theta * rs * c.transpose()) / (1.0 - theta);
  Matrix B0 = (1.0 - theta) * Matrix::Identity(t.cols(), t.cols()) + theta * Vector::Ones(t.cols()) * c.transpose();
  std::vector<Matrix> parts;
  for (Eigen::Index k = 0; k < t.cols(); ++k) {
    const Vector u = K.col(k), v = B0.row(k).transpose();
    parts.push_back(flip ? embed(v, u, x, r.rows(), r.cols()) : embed(u, v, x, r.rows(), r.cols()));
  }
  return parts;
}

}  // namespace cind
