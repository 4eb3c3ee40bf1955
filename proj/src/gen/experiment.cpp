#include "quadtask/gen/experiment.hpp"

#include <algorithm>
#include <random>

#include "quadtask/error.hpp"

namespace quadtask {

std::string to_string(Family f) {
  switch (f) {
    case Family::banded: return "banded";
    case Family::growing_block: return "growing-block";
    case Family::random_blocks: return "random-blocks";
  }
  return "unknown";
}

Family parse_family(std::string_view s) {
  std::string t(s);
  std::replace(t.begin(), t.end(), '_', '-');
  if (t == "banded") return Family::banded;
  if (t == "growing-block") return Family::growing_block;
  if (t == "random-blocks") return Family::random_blocks;
  throw InvalidArgument("unknown case '" + std::string(s) + "' (expected banded, growing-block or random-blocks)");
}

Index default_block_count(Index n) { return std::max<Index>(1, n / 100000); }

Pattern::Pattern(Index n, Index half_bandwidth, Index block_size, std::vector<Index> block_starts)
    : n_(n), b_(half_bandwidth), s_(block_size), starts_(std::move(block_starts)) {
  if (n <= 0) throw InvalidArgument("pattern dimension must be positive");
  if (b_ < 0 || s_ < 0) throw InvalidArgument("bandwidth and block size must be non-negative");
  if (s_ == 0) starts_.clear();
  std::sort(starts_.begin(), starts_.end());
  for (std::size_t t = 0; t < starts_.size(); ++t) {
    if (starts_[t] < 0 || starts_[t] + s_ > n_) throw PlacementError("block does not fit inside the matrix");
    if (t > 0 && starts_[t] < starts_[t - 1] + s_) throw PlacementError("diagonal blocks overlap");
  }
}

Index Pattern::block_of(Index k) const {
  auto it = std::upper_bound(starts_.begin(), starts_.end(), k);
  if (it == starts_.begin()) return -1;
  --it;
  return k < *it + s_ ? *it : -1;
}

bool Pattern::contains(Index i, Index k) const {
  if (i < 0 || k < 0 || i >= n_ || k >= n_) return false;
  if (std::abs(i - k) <= b_) return true;
  const Index p = block_of(k);
  return p >= 0 && i >= p && i < p + s_;
}

std::pair<Index, Index> Pattern::column_range(Index k) const {
  Index lo = std::max<Index>(0, k - b_), hi = std::min(n_ - 1, k + b_);
  if (const Index p = block_of(k); p >= 0) {
    lo = std::min(lo, p);
    hi = std::max(hi, p + s_ - 1);
  }
  return {lo, hi};
}

Index Pattern::column_count(Index k) const {
  const auto [lo, hi] = column_range(k);
  return hi - lo + 1;
}

bool Pattern::intersects(Index row0, Index col0, Index dim) const {
  const Index r1 = std::min(n_, row0 + dim), c1 = std::min(n_, col0 + dim);
  if (row0 >= r1 || col0 >= c1) return false;
  const Index gap = std::max<Index>({0, row0 - (c1 - 1), col0 - (r1 - 1)});
  if (gap <= b_) return true;
  for (Index p : starts_) {
    if (p < r1 && p + s_ > row0 && p < c1 && p + s_ > col0) return true;
  }
  return false;
}

std::vector<Index> place_blocks(Index n, Index block_size, Index n_blocks, std::uint64_t seed, int max_attempts) {
  if (n_blocks <= 0 || block_size <= 0) return {};
  if (block_size > n) throw PlacementError("block of size " + std::to_string(block_size) + " exceeds dimension " + std::to_string(n));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> start(0, n - block_size);
  std::vector<Index> s(static_cast<std::size_t>(n_blocks));
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    for (auto& x : s) x = start(rng);
    std::sort(s.begin(), s.end());
    bool ok = true;
    for (std::size_t t = 1; t < s.size() && ok; ++t) ok = s[t] >= s[t - 1] + block_size;
    if (ok) return s;
  }
  throw PlacementError("no non-overlapping placement of " + std::to_string(n_blocks) + " blocks of size " +
                       std::to_string(block_size) + " in dimension " + std::to_string(n) + " after " +
                       std::to_string(max_attempts) + " attempts");
}

std::vector<Index> reference_block_starts(Index n, Index block_size, Index n_blocks) {
  if (n_blocks <= 0 || block_size <= 0) return {};
  const Index w = n / n_blocks;
  if (block_size > w) throw PlacementError("blocks do not fit in equal strips");
  std::vector<Index> s{0};
  for (Index t = 1; t < n_blocks; ++t) s.push_back(t * w + (w - block_size) / 2);
  return s;
}

Pattern make_pattern(const ExperimentCase& c) {
  switch (c.family) {
    case Family::banded:
      return Pattern(c.n, c.half_bandwidth);
    case Family::growing_block:
      return Pattern(c.n, c.half_bandwidth, c.block_size, c.block_size > 0 ? std::vector<Index>{0} : std::vector<Index>{});
    case Family::random_blocks: {
      const Index nb = c.n_blocks > 0 ? c.n_blocks : default_block_count(c.n);
      return Pattern(c.n, c.half_bandwidth, c.block_size, place_blocks(c.n, c.block_size, nb, c.seed));
    }
  }
  throw InvalidArgument("unknown family");
}

ColumnSums column_sums(const Pattern& p) {
  using U = unsigned __int128;
  const Index n = p.n(), b = p.half_bandwidth(), s = p.block_size();
  // c(k) is linear between consecutive breakpoints: where a band edge meets
  // the matrix edge, where block membership changes, and where the band
  // edge crosses a block edge.
  std::vector<Index> cuts{0, n, b, n - 1 - b};
  for (Index q : p.block_starts()) {
    for (Index x : {q, q + s, q + b, q + s - 1 - b}) cuts.push_back(x);
  }
  std::vector<Index> points;
  for (Index x : cuts) {
    for (Index d : {-1, 0, 1}) {
      const Index y = x + d;
      if (y >= 0 && y <= n) points.push_back(y);
    }
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());

  ColumnSums out;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const Index x0 = points[i], len = points[i + 1] - x0;
    const __int128 c0 = p.column_count(x0);
    const __int128 d = len > 1 ? p.column_count(x0 + 1) - c0 : 0;
    if (len > 1 && p.column_count(x0 + len - 1) != c0 + d * (len - 1)) {
      throw std::logic_error("column count is not linear between breakpoints");
    }
    const __int128 L = len;
    const __int128 st = L * (L - 1) / 2;                // sum of t
    const __int128 st2 = (L - 1) * L * (2 * L - 1) / 6;  // sum of t^2
    out.count += static_cast<U>(L * c0 + d * st);
    out.count_squared += static_cast<U>(L * c0 * c0 + 2 * c0 * d * st + d * d * st2);
  }
  return out;
}

namespace {

std::uint64_t narrow(unsigned __int128 v, const char* what) {
  if (v > std::numeric_limits<std::uint64_t>::max()) throw InvalidArgument(std::string(what) + " exceeds 64 bits");
  return static_cast<std::uint64_t>(v);
}

unsigned __int128 flops_wide(const Pattern& p) { return 2 * column_sums(p).count_squared; }

}  // namespace

std::uint64_t flop_count(const Pattern& p) { return narrow(flops_wide(p), "flop count"); }

std::uint64_t flop_count_exact(const ExperimentCase& c) { return flop_count(make_pattern(c)); }

std::uint64_t pattern_nnz(const Pattern& p) { return narrow(column_sums(p).count, "nonzero count"); }

Index solve_block_size(Family family, Index n, Index b, double target_ratio, Index n_blocks) {
  if (family == Family::banded) throw InvalidArgument("banded matrices have no block to size");
  if (!(target_ratio > 0.0)) throw InvalidArgument("target ratio must be positive");
  const Index nb = family == Family::growing_block ? 1 : (n_blocks > 0 ? n_blocks : default_block_count(n));
  const long double target = static_cast<long double>(flops_wide(Pattern(n, b))) * target_ratio;
  auto reaches = [&](Index s) {
    std::vector<Index> starts;
    if (s > 0) starts = family == Family::growing_block ? std::vector<Index>{0} : reference_block_starts(n, s, nb);
    return static_cast<long double>(flops_wide(Pattern(n, b, s, std::move(starts)))) >= target;
  };
  Index lo = 0, hi = family == Family::growing_block ? n : n / nb;
  if (!reaches(hi)) {
    throw InvalidArgument("no block size reaches " + std::to_string(target_ratio) + " times the banded flop count");
  }
  if (reaches(lo)) return lo;
  // Invariant: reaches(hi) and !reaches(lo).
  while (hi - lo > 1) {
    const Index mid = lo + (hi - lo) / 2;
    (reaches(mid) ? hi : lo) = mid;
  }
  return hi;
}

bool PatternSource::may_touch(Index row0, Index col0, Index dim) const { return p_.intersects(row0, col0, dim); }

Leaf PatternSource::leaf(const LeafShape& shape, Index row0, Index col0) const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(shape.n, shape.n);
  const Index cols = std::min(shape.n, p_.n() - col0);
  for (Index j = 0; j < cols; ++j) {
    const auto [lo, hi] = p_.column_range(col0 + j);
    const Index a = std::max(lo, row0), z = std::min(hi, row0 + shape.n - 1);
    if (a <= z) d.col(j).segment(a - row0, z - a + 1).setOnes();
  }
  return leaf_from_dense(shape, d);
}

Matrix generate(Runtime& rt, const ExperimentCase& c, const MatrixParams& params, const OwnerPolicy& owners) {
  if (params.n_logical != c.n) throw DimensionMismatch("matrix parameters do not match the case dimension");
  const Pattern pattern = make_pattern(c);
  return build_from_source(rt, params, PatternSource(pattern), owners);
}

}  // namespace quadtask
