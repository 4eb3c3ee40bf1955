#include "quadtask/matrix/quadtree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <unordered_set>

#include "quadtask/error.hpp"

namespace quadtask {

MatrixParams MatrixParams::make(Index n_logical, Index leaf_dim, LeafKind kind, Index block_size) {
  if (n_logical <= 0) throw InvalidArgument("matrix dimension must be positive");
  if (leaf_dim <= 0) throw InvalidArgument("leaf dimension must be positive");
  MatrixParams p;
  p.n_logical = n_logical;
  p.leaf_dim = leaf_dim;
  p.block_size = kind == LeafKind::dense ? leaf_dim : block_size;
  p.leaf_kind = kind;
  validate(p.leaf_shape());
  p.n_padded = leaf_dim;
  while (p.n_padded < n_logical) {
    p.n_padded *= 2;
    ++p.depth;
  }
  return p;
}

namespace {

using Children = QuadNode::Children;

bool all_nil(const Children& c) {
  return std::all_of(c.begin(), c.end(), [](ChunkId id) { return id.is_nil(); });
}

std::shared_ptr<const QuadNode> node_at(Runtime& rt, ChunkId id) { return rt.fetch<QuadNode>(id, kUntracked); }

void check_index(const MatrixParams& p, Index row, Index col) {
  if (row < 0 || col < 0 || row >= p.n_logical || col >= p.n_logical) {
    throw IndexOutOfRange("index (" + std::to_string(row) + ", " + std::to_string(col) +
                          ") outside a matrix of dimension " + std::to_string(p.n_logical));
  }
}

// A branch lives with its first non-nil child.
WorkerId branch_owner(const Runtime& rt, const Children& c, WorkerId fallback) {
  for (ChunkId id : c) {
    if (!id.is_nil()) return rt.owner(id);
  }
  return fallback;
}

// Hands out owners for split-level subtrees in contiguous runs.
struct Dealer {
  std::size_t n_workers = 1;
  int split = 0;
  std::size_t count = 0;
  std::size_t next = 0;

  WorkerId take() {
    const auto w = count == 0 ? 0 : next * n_workers / count;
    ++next;
    return static_cast<WorkerId>(w);
  }
};

class TripletBuilder {
 public:
  TripletBuilder(Runtime& rt, const MatrixParams& p, Dealer& dealer) : rt_(rt), p_(p), dealer_(dealer) {}

  ChunkId build(int level, Index r0, Index c0, std::vector<Triplet> entries, WorkerId owner) {
    if (entries.empty()) return {};
    if (level == dealer_.split) owner = dealer_.take();
    if (level == p_.depth) {
      for (auto& t : entries) {
        t.row -= r0;
        t.col -= c0;
      }
      return store_leaf(rt_, owner, level, leaf_from_triplets(p_.leaf_shape(), entries));
    }
    const Index half = p_.node_dim(level) / 2;
    std::array<std::vector<Triplet>, 4> parts;
    for (const auto& t : entries) parts[quadrant(t.row >= r0 + half, t.col >= c0 + half)].push_back(t);
    std::vector<Triplet>().swap(entries);
    Children c;
    for (int q = 0; q < 4; ++q) {
      c[q] = build(level + 1, r0 + (q / 2) * half, c0 + (q % 2) * half, std::move(parts[q]), owner);
    }
    return store_branch(rt_, branch_owner(rt_, c, owner), level, c);
  }

 private:
  Runtime& rt_;
  const MatrixParams& p_;
  Dealer& dealer_;
};

class SourceBuilder {
 public:
  SourceBuilder(Runtime& rt, const MatrixParams& p, const ElementSource& src, bool symmetric, Dealer& dealer)
      : rt_(rt), p_(p), src_(src), symmetric_(symmetric), dealer_(dealer) {}

  bool visible(int level, Index r0, Index c0) const {
    if (r0 >= p_.n_logical || c0 >= p_.n_logical) return false;
    if (symmetric_ && r0 > c0) return false;
    return src_.may_touch(r0, c0, p_.node_dim(level));
  }

  std::size_t count(int level, Index r0, Index c0) const {
    if (!visible(level, r0, c0)) return 0;
    if (level == dealer_.split) return 1;
    const Index half = p_.node_dim(level) / 2;
    std::size_t n = 0;
    for (int q = 0; q < 4; ++q) n += count(level + 1, r0 + (q / 2) * half, c0 + (q % 2) * half);
    return n;
  }

  ChunkId build(int level, Index r0, Index c0, WorkerId owner) {
    if (!visible(level, r0, c0)) return {};
    if (level == dealer_.split) owner = dealer_.take();
    if (level == p_.depth) {
      Leaf leaf = src_.leaf(p_.leaf_shape(), r0, c0);
      if (symmetric_ && r0 == c0) leaf = leaf_upper(leaf);
      return store_leaf(rt_, owner, level, std::move(leaf));
    }
    const Index half = p_.node_dim(level) / 2;
    Children c;
    for (int q = 0; q < 4; ++q) c[q] = build(level + 1, r0 + (q / 2) * half, c0 + (q % 2) * half, owner);
    return store_branch(rt_, branch_owner(rt_, c, owner), level, c);
  }

 private:
  Runtime& rt_;
  const MatrixParams& p_;
  const ElementSource& src_;
  bool symmetric_;
  Dealer& dealer_;
};

class DenseSource final : public ElementSource {
 public:
  DenseSource(const Eigen::MatrixXd& m) : m_(m) {}

  bool may_touch(Index r0, Index c0, Index dim) const override {
    const Index rows = std::min(dim, m_.rows() - r0);
    const Index cols = std::min(dim, m_.cols() - c0);
    return rows > 0 && cols > 0 && (m_.block(r0, c0, rows, cols).array() != 0.0).any();
  }

  Leaf leaf(const LeafShape& shape, Index r0, Index c0) const override {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(shape.n, shape.n);
    const Index rows = std::min(shape.n, m_.rows() - r0);
    const Index cols = std::min(shape.n, m_.cols() - c0);
    d.topLeftCorner(rows, cols) = m_.block(r0, c0, rows, cols);
    return leaf_from_dense(shape, d);
  }

 private:
  const Eigen::MatrixXd& m_;
};

}  // namespace

ChunkId store_leaf(Runtime& rt, WorkerId owner, int level, Leaf leaf) {
  if (leaf_is_zero(leaf)) return {};
  const double nsq = leaf_norm_squared(leaf);
  return rt.register_object(std::make_shared<QuadNode>(level, std::move(leaf)), owner, nsq);
}

ChunkId store_branch(Runtime& rt, WorkerId owner, int level, const Children& children) {
  if (all_nil(children)) return {};
  double nsq = 0.0;
  auto node = std::make_shared<QuadNode>(level, children);
  std::size_t weight = node->size_bytes();
  for (ChunkId c : children) {
    if (c.is_nil()) continue;
    nsq += rt.summary(c);
    weight += rt.weight(c);
  }
  return rt.register_object(std::move(node), owner, nsq, weight);
}

ChunkId store_leaf(TaskContext& ctx, int level, Leaf leaf) {
  if (leaf_is_zero(leaf)) return {};
  const double nsq = leaf_norm_squared(leaf);
  return ctx.register_chunk(std::make_shared<QuadNode>(level, std::move(leaf)), nsq);
}

ChunkId store_branch(TaskContext& ctx, int level, const Children& children) {
  if (all_nil(children)) return {};
  double nsq = 0.0;
  auto node = std::make_shared<QuadNode>(level, children);
  std::size_t weight = node->size_bytes();
  for (ChunkId c : children) {
    if (c.is_nil()) continue;
    nsq += ctx.summary(c);
    weight += ctx.weight(c);
  }
  return ctx.register_chunk(std::move(node), nsq, weight);
}

int OwnerPolicy::resolve(const MatrixParams& p) const {
  if (split_depth >= 0) return std::min(split_depth, p.depth);
  int d = 0;
  while ((std::size_t{1} << d) < 2 * std::max<std::size_t>(n_workers, 1)) ++d;
  return std::min(d, p.depth);
}

Matrix build_from_triplets(Runtime& rt, const MatrixParams& params, std::span<const Triplet> entries,
                           const OwnerPolicy& owners, bool symmetric) {
  std::vector<Triplet> kept;
  kept.reserve(entries.size());
  for (const auto& t : entries) {
    check_index(params, t.row, t.col);
    if (!symmetric || t.row <= t.col) kept.push_back(t);
  }
  Dealer dealer{std::max<std::size_t>(owners.n_workers, 1), owners.resolve(params)};
  const Index cell = params.node_dim(dealer.split);
  const Index cells = params.n_padded / cell;
  std::unordered_set<Index> occupied;
  for (const auto& t : kept) occupied.insert((t.row / cell) * cells + t.col / cell);
  dealer.count = occupied.size();
  TripletBuilder builder(rt, params, dealer);
  return Matrix{params, builder.build(0, 0, 0, std::move(kept), 0), symmetric};
}

Matrix build_from_source(Runtime& rt, const MatrixParams& params, const ElementSource& source,
                         const OwnerPolicy& owners, bool symmetric) {
  Dealer dealer{std::max<std::size_t>(owners.n_workers, 1), owners.resolve(params)};
  SourceBuilder builder(rt, params, source, symmetric, dealer);
  dealer.count = builder.count(0, 0, 0);
  return Matrix{params, builder.build(0, 0, 0, 0), symmetric};
}

Matrix build_from_dense(Runtime& rt, const MatrixParams& params, const Eigen::MatrixXd& dense,
                        const OwnerPolicy& owners, bool symmetric) {
  if (dense.rows() != params.n_logical || dense.cols() != params.n_logical) {
    throw DimensionMismatch("dense matrix is " + std::to_string(dense.rows()) + "x" + std::to_string(dense.cols()) +
                            ", expected dimension " + std::to_string(params.n_logical));
  }
  return build_from_source(rt, params, DenseSource(dense), owners, symmetric);
}

Matrix build_explicit_zero(Runtime& rt, const MatrixParams& params, bool symmetric) {
  std::function<ChunkId(int, Index, Index)> build = [&](int level, Index r0, Index c0) -> ChunkId {
    if (symmetric && r0 > c0) return {};
    if (level == params.depth) {
      return rt.register_object(std::make_shared<QuadNode>(level, leaf_zero(params.leaf_shape())), 0, 0.0);
    }
    const Index half = params.node_dim(level) / 2;
    Children c;
    for (int q = 0; q < 4; ++q) c[q] = build(level + 1, r0 + (q / 2) * half, c0 + (q % 2) * half);
    return rt.register_object(std::make_shared<QuadNode>(level, c), 0, 0.0);
  };
  return Matrix{params, build(0, 0, 0), symmetric};
}

std::vector<double> get_elements(Runtime& rt, const Matrix& m, std::span<const Coord> indices) {
  const MatrixParams& p = m.params;
  std::vector<double> out(indices.size(), 0.0);
  std::vector<Coord> where(indices.begin(), indices.end());
  for (auto& c : where) {
    check_index(p, c.row, c.col);
    if (m.symmetric && c.row > c.col) std::swap(c.row, c.col);
  }
  std::vector<std::size_t> all(where.size());
  std::iota(all.begin(), all.end(), 0);

  std::function<void(ChunkId, Index, Index, std::vector<std::size_t>)> descend =
      [&](ChunkId id, Index r0, Index c0, std::vector<std::size_t> which) {
        if (id.is_nil() || which.empty()) return;
        auto node = node_at(rt, id);
        if (node->is_leaf()) {
          std::vector<Coord> local;
          local.reserve(which.size());
          for (auto i : which) local.push_back({where[i].row - r0, where[i].col - c0});
          const auto values = leaf_get_elements(node->leaf(), local);
          for (std::size_t k = 0; k < which.size(); ++k) out[which[k]] = values[k];
          return;
        }
        const Index half = p.node_dim(node->level()) / 2;
        std::array<std::vector<std::size_t>, 4> parts;
        for (auto i : which) parts[quadrant(where[i].row >= r0 + half, where[i].col >= c0 + half)].push_back(i);
        for (int q = 0; q < 4; ++q) {
          descend(node->children()[q], r0 + (q / 2) * half, c0 + (q % 2) * half, std::move(parts[q]));
        }
      };
  descend(m.root, 0, 0, std::move(all));
  return out;
}

namespace {

// Depth-first visit of stored leaves with their global offsets.
template <class F>
void for_each_leaf(Runtime& rt, const MatrixParams& p, ChunkId id, Index r0, Index c0, F&& f) {
  if (id.is_nil()) return;
  auto node = node_at(rt, id);
  if (node->is_leaf()) {
    f(node->leaf(), r0, c0);
    return;
  }
  const Index half = p.node_dim(node->level()) / 2;
  for (int q = 0; q < 4; ++q) for_each_leaf(rt, p, node->children()[q], r0 + (q / 2) * half, c0 + (q % 2) * half, f);
}

}  // namespace

TreeStats tree_stats(Runtime& rt, const Matrix& m) {
  TreeStats s;
  std::function<void(ChunkId)> walk = [&](ChunkId id) {
    if (id.is_nil()) return;
    auto node = node_at(rt, id);
    s.stored_bytes += node->size_bytes();
    if (node->is_leaf()) {
      ++s.leaf_chunks;
      s.nnz += leaf_nnz(node->leaf());
      return;
    }
    ++s.branch_chunks;
    for (ChunkId c : node->children()) walk(c);
  };
  walk(m.root);
  return s;
}

Eigen::MatrixXd to_dense(Runtime& rt, const Matrix& m) {
  const MatrixParams& p = m.params;
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(p.n_padded, p.n_padded);
  for_each_leaf(rt, p, m.root, 0, 0, [&](const Leaf& leaf, Index r0, Index c0) {
    full.block(r0, c0, p.leaf_dim, p.leaf_dim) = leaf_to_dense(leaf);
  });
  Eigen::MatrixXd out = full.topLeftCorner(p.n_logical, p.n_logical);
  if (m.symmetric) out.triangularView<Eigen::StrictlyLower>() = out.transpose();
  return out;
}

std::vector<Triplet> collect_triplets(Runtime& rt, const Matrix& m) {
  std::vector<Triplet> out;
  for_each_leaf(rt, m.params, m.root, 0, 0, [&](const Leaf& leaf, Index r0, Index c0) {
    const Eigen::MatrixXd d = leaf_to_dense(leaf);
    for (Index j = 0; j < d.cols(); ++j)
      for (Index i = 0; i < d.rows(); ++i)
        if (d(i, j) != 0.0) out.push_back({r0 + i, c0 + j, d(i, j)});
  });
  std::sort(out.begin(), out.end(),
            [](const Triplet& a, const Triplet& b) { return a.col != b.col ? a.col < b.col : a.row < b.row; });
  return out;
}

Bytes serialize_tree(Runtime& rt, const Matrix& m) {
  ByteWriter out;
  out.i64(m.params.n_logical);
  out.i64(m.params.leaf_dim);
  out.u8(static_cast<std::uint8_t>(m.params.leaf_kind));
  out.u8(m.symmetric ? 1 : 0);
  std::function<void(ChunkId)> walk = [&](ChunkId id) {
    if (id.is_nil()) {
      out.u8(0);
      return;
    }
    auto node = node_at(rt, id);
    if (node->is_leaf()) {
      out.u8(1);
      write_leaf(out, node->leaf());
      return;
    }
    out.u8(2);
    for (ChunkId c : node->children()) walk(c);
  };
  walk(m.root);
  return out.take();
}

std::optional<std::string> find_structure_violation(Runtime& rt, const Matrix& m) {
  const MatrixParams& p = m.params;
  std::optional<std::string> found;
  auto fail = [&](std::string what, int level, Index r0, Index c0) {
    if (!found) {
      found = what + " (level " + std::to_string(level) + ", offset " + std::to_string(r0) + "," + std::to_string(c0) +
              ")";
    }
  };
  std::function<void(ChunkId, int, Index, Index)> walk = [&](ChunkId id, int level, Index r0, Index c0) {
    if (id.is_nil() || found) return;
    auto node = node_at(rt, id);
    if (node->level() != level) return fail("node records the wrong level", level, r0, c0);
    if (m.symmetric && r0 > c0) return fail("symmetric tree stores a node below the diagonal", level, r0, c0);
    const double summary = rt.summary(id);
    if (node->is_leaf()) {
      if (level != p.depth) return fail("leaf above the bottom level", level, r0, c0);
      const Leaf& leaf = node->leaf();
      if (shape_of(leaf) != p.leaf_shape()) return fail("leaf shape differs from the matrix parameters", level, r0, c0);
      if (leaf_is_zero(leaf)) return fail("all-zero leaf stored", level, r0, c0);
      const Eigen::MatrixXd d = leaf_to_dense(leaf);
      const Index rows = std::max<Index>(0, p.n_logical - r0), cols = std::max<Index>(0, p.n_logical - c0);
      if (rows < p.leaf_dim && !d.bottomRows(p.leaf_dim - std::min(rows, p.leaf_dim)).isZero(0.0))
        return fail("nonzero in padding rows", level, r0, c0);
      if (cols < p.leaf_dim && !d.rightCols(p.leaf_dim - std::min(cols, p.leaf_dim)).isZero(0.0))
        return fail("nonzero in padding columns", level, r0, c0);
      if (m.symmetric && r0 == c0 && !d.triangularView<Eigen::StrictlyLower>().toDenseMatrix().isZero(0.0))
        return fail("diagonal leaf of a symmetric tree is not upper triangular", level, r0, c0);
      const double nsq = leaf_norm_squared(leaf);
      if (std::abs(summary - nsq) > 1e-12 * nsq) return fail("chunk summary disagrees with leaf norm", level, r0, c0);
      return;
    }
    if (level == p.depth) return fail("branch at the bottom level", level, r0, c0);
    const auto& c = node->children();
    if (all_nil(c)) return fail("branch with four nil children", level, r0, c0);
    double nsq = 0.0;
    for (ChunkId k : c) nsq += k.is_nil() ? 0.0 : rt.summary(k);
    if (std::abs(summary - nsq) > 1e-12 * nsq) return fail("chunk summary disagrees with children", level, r0, c0);
    const Index half = p.node_dim(level) / 2;
    for (int q = 0; q < 4; ++q) walk(c[q], level + 1, r0 + (q / 2) * half, c0 + (q % 2) * half);
  };
  walk(m.root, 0, 0, 0);
  return found;
}

double frobenius_norm(Runtime& rt, const Matrix& m) {
  if (m.root.is_nil()) return 0.0;
  if (!m.symmetric) return std::sqrt(rt.summary(m.root));
  // Off-diagonal subtrees stand for themselves and their mirror image.
  std::function<double(ChunkId)> diag = [&](ChunkId id) -> double {
    if (id.is_nil()) return 0.0;
    auto node = node_at(rt, id);
    if (node->is_leaf()) return leaf_norm_squared(leaf_symmetrize(node->leaf()));
    const auto& c = node->children();
    const double off = c[ne].is_nil() ? 0.0 : rt.summary(c[ne]);
    return diag(c[nw]) + diag(c[se]) + 2.0 * off;
  };
  return std::sqrt(diag(m.root));
}

}  // namespace quadtask
