#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "condind/distribution.hpp"

namespace cind {

struct SupportPattern {
  int rows = 0;
  int cols = 0;
  std::vector<std::pair<int, int>> cells;  // row-major order

  bool contains(int i, int j) const;
};

SupportPattern support_pattern(const Matrix& m, double zeroTol = 0.0);

struct BlockSplit {
  std::vector<int> I1, I2, J1, J2;
};

// Thrown by operations that need a non-block input.
class BlockError : public Error {
 public:
  BlockError(BlockSplit s, const std::string& what) : Error(Errc::IsBlock, what), split_(std::move(s)) {}
  const BlockSplit& split() const { return split_; }

 private:
  BlockSplit split_;
};

// nullopt means the support graph is connected (not a block matrix).
std::optional<BlockSplit> block_split(const Matrix& m, double zeroTol = 0.0);
inline std::optional<BlockSplit> block_split(const JointDistribution& j, double zeroTol = 0.0) {
  return block_split(j.p, zeroTol);
}

struct RDecomposition {
  std::vector<Matrix> summands;
};

// Support is a full row-set x column-set rectangle.
bool is_r_matrix(const Matrix& m, double zeroTol = 0.0);
bool rectangle_support(const SupportPattern& s);

// Walk over nonzero cells; each summand lives on two cells of one row or column.
RDecomposition r_decomposition(const Matrix& m, double zeroTol = 0.0);
inline RDecomposition r_decomposition(const JointDistribution& j, double zeroTol = 0.0) {
  return r_decomposition(j.p, zeroTol);
}

// Greedy merge of consecutive summands into rectangles inside the support,
// masses shared evenly where rectangles overlap. With `keepRank1`, the union
// must itself be a rectangle within a single row or column.
RDecomposition merge_consecutive(const RDecomposition& d, bool keepRank1, double zeroTol = 0.0);

int r_complexity_bound(const JointDistribution& j, double zeroTol = 0.0);

// Exhaustive search (m*n <= 12); nullopt when no decomposition of length <= limit exists.
std::optional<int> exact_r_complexity(const JointDistribution& j, int limit, double zeroTol = 0.0);

// Numerical rank-1 test: second singular value <= relTol * first.
bool is_rank1(const Matrix& m, double relTol = 1e-10);

// Perturbed-basis split into rank-1 parts with the same support.
std::vector<Matrix> rank1_split(const Matrix& r, int maxHalvings = 60);

// Same contract with at most min(|rows|,|cols|) strictly positive rank-1 parts.
std::vector<Matrix> rank1_split_compact(const Matrix& r);

}  // namespace cind
