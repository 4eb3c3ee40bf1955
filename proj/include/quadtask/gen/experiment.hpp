#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "quadtask/matrix/quadtree.hpp"

namespace quadtask {

enum class Family { banded, growing_block, random_blocks };

std::string to_string(Family f);
// Accepts "banded", "growing-block", "random-blocks" (or with underscores).
Family parse_family(std::string_view s);

struct ExperimentCase {
  Family family = Family::banded;
  Index n = 0;
  Index half_bandwidth = 0;
  Index block_size = 0;  // s; unused for banded
  Index n_blocks = 0;    // random_blocks only; 0 means max(1, n / 100000)
  std::uint64_t seed = 0;
};

Index default_block_count(Index n);

// Sparsity pattern: |i - j| <= b, plus dense s x s blocks on the diagonal.
class Pattern {
 public:
  Pattern(Index n, Index half_bandwidth, Index block_size = 0, std::vector<Index> block_starts = {});

  Index n() const { return n_; }
  Index half_bandwidth() const { return b_; }
  Index block_size() const { return s_; }
  const std::vector<Index>& block_starts() const { return starts_; }

  bool contains(Index i, Index k) const;
  // Nonzero rows of column k form one contiguous range [first, last].
  std::pair<Index, Index> column_range(Index k) const;
  Index column_count(Index k) const;
  bool intersects(Index row0, Index col0, Index dim) const;

 private:
  // Start of the block holding k, or -1.
  Index block_of(Index k) const;

  Index n_, b_, s_;
  std::vector<Index> starts_;
};

// Seeded rejection sampling of non-overlapping block offsets in [0, n - s].
// Throws PlacementError when no placement is found within the retry bound.
std::vector<Index> place_blocks(Index n, Index block_size, Index n_blocks, std::uint64_t seed, int max_attempts = 1000);

// Deterministic placement used when solving for block sizes: the first block
// in the upper left corner, block t centred in the t-th of n_blocks equal
// strips.
std::vector<Index> reference_block_starts(Index n, Index block_size, Index n_blocks);

// Pattern of a case; random_blocks placements come from place_blocks.
Pattern make_pattern(const ExperimentCase& c);

// Sums over columns of the pattern, evaluated piecewise in closed form.
struct ColumnSums {
  unsigned __int128 count = 0;          // nnz
  unsigned __int128 count_squared = 0;  // sum over k of c(k)^2
};

ColumnSums column_sums(const Pattern& p);

// 2 * |{(i, j, k) : P(i,k) and P(k,j)}| = 2 * sum_k c(k)^2 for a symmetric
// pattern. Throws InvalidArgument if the count does not fit 64 bits.
std::uint64_t flop_count(const Pattern& p);
std::uint64_t flop_count_exact(const ExperimentCase& c);
std::uint64_t pattern_nnz(const Pattern& p);

// Smallest s with flops(family, s) >= target_ratio * flops(banded), using
// the reference placement for random_blocks.
Index solve_block_size(Family family, Index n, Index half_bandwidth, double target_ratio = 2.0, Index n_blocks = 0);

// Element source with value 1.0 at every pattern position.
class PatternSource final : public ElementSource {
 public:
  explicit PatternSource(const Pattern& p) : p_(p) {}
  bool may_touch(Index row0, Index col0, Index dim) const override;
  Leaf leaf(const LeafShape& shape, Index row0, Index col0) const override;

 private:
  const Pattern& p_;
};

Matrix generate(Runtime& rt, const ExperimentCase& c, const MatrixParams& params, const OwnerPolicy& owners = {});

}  // namespace quadtask
