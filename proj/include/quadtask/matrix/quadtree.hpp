#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "quadtask/matrix/matrix_params.hpp"
#include "quadtask/matrix/quad_node.hpp"
#include "quadtask/runtime/runtime.hpp"

namespace quadtask {

// Node registration. Each returns nil instead of storing an all-zero leaf or
// a branch with four nil children. The chunk summary is the squared Frobenius
// norm of the stored subtree.
ChunkId store_leaf(Runtime& rt, WorkerId owner, int level, Leaf leaf);
ChunkId store_branch(Runtime& rt, WorkerId owner, int level, const QuadNode::Children& children);
ChunkId store_leaf(TaskContext& ctx, int level, Leaf leaf);
ChunkId store_branch(TaskContext& ctx, int level, const QuadNode::Children& children);

// Who owns the chunks of a freshly built tree. Non-empty subtrees at the
// split depth are dealt to workers in contiguous runs of depth-first order;
// a node above the split depth lives with its first non-nil child.
struct OwnerPolicy {
  std::size_t n_workers = 1;
  int split_depth = -1;  // -1: smallest d with 2^d >= 2 * n_workers, capped at the tree depth

  int resolve(const MatrixParams& p) const;
};

// Element provider for structured builders.
class ElementSource {
 public:
  virtual ~ElementSource() = default;
  // May return true for an empty region, never false for a non-empty one.
  virtual bool may_touch(Index row0, Index col0, Index dim) const = 0;
  virtual Leaf leaf(const LeafShape& shape, Index row0, Index col0) const = 0;
};

// Duplicates are summed. A symmetric build keeps entries with row <= col and
// ignores the strictly lower ones.
Matrix build_from_triplets(Runtime& rt, const MatrixParams& params, std::span<const Triplet> entries,
                           const OwnerPolicy& owners = {}, bool symmetric = false);
Matrix build_from_source(Runtime& rt, const MatrixParams& params, const ElementSource& source,
                         const OwnerPolicy& owners = {}, bool symmetric = false);
Matrix build_from_dense(Runtime& rt, const MatrixParams& params, const Eigen::MatrixXd& dense,
                        const OwnerPolicy& owners = {}, bool symmetric = false);

// Every leaf position of a tree made of explicit zeros (no nil below the
// root). For testing the zero algebra.
Matrix build_explicit_zero(Runtime& rt, const MatrixParams& params, bool symmetric = false);

// Reads are untracked (driver side). Symmetric matrices answer lower
// positions from the stored upper triangle.
std::vector<double> get_elements(Runtime& rt, const Matrix& m, std::span<const Coord> indices);

struct TreeStats {
  std::size_t leaf_chunks = 0;
  std::size_t branch_chunks = 0;
  std::size_t stored_bytes = 0;
  std::size_t nnz = 0;

  friend bool operator==(const TreeStats&, const TreeStats&) = default;
};

TreeStats tree_stats(Runtime& rt, const Matrix& m);

// Dense n_logical x n_logical copy; symmetric matrices are expanded.
Eigen::MatrixXd to_dense(Runtime& rt, const Matrix& m);

// Stored nonzeros in column-major order (upper triangle for symmetric).
std::vector<Triplet> collect_triplets(Runtime& rt, const Matrix& m);

// Preorder encoding of structure and leaf contents, independent of chunk
// identifiers and owners. Equal bytes mean equal trees.
Bytes serialize_tree(Runtime& rt, const Matrix& m);

// Checks every structural invariant of a tree; returns a description of the
// first violation found.
std::optional<std::string> find_structure_violation(Runtime& rt, const Matrix& m);

double frobenius_norm(Runtime& rt, const Matrix& m);

}  // namespace quadtask
