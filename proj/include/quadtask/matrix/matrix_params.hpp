#pragma once

#include "quadtask/leaf/leaf.hpp"
#include "quadtask/runtime/chunk_id.hpp"

namespace quadtask {

// Geometry shared by every node of one quadtree. The matrix is padded to
// n_padded = leaf_dim * 2^depth; rows and columns past n_logical are zero and
// never stored.
struct MatrixParams {
  Index n_logical = 0;
  Index leaf_dim = 256;
  Index block_size = 64;
  LeafKind leaf_kind = LeafKind::block_sparse;
  int depth = 0;
  Index n_padded = 0;

  static MatrixParams make(Index n_logical, Index leaf_dim = 256, LeafKind kind = LeafKind::block_sparse,
                           Index block_size = 64);

  LeafShape leaf_shape() const { return {leaf_kind, leaf_dim, block_size}; }
  Index node_dim(int level) const { return leaf_dim << (depth - level); }

  friend bool operator==(const MatrixParams&, const MatrixParams&) = default;
};

// Handle to an immutable quadtree. A symmetric matrix stores its upper
// triangle only: SW quadrants of diagonal nodes are nil and diagonal leaves
// are upper triangular.
struct Matrix {
  MatrixParams params;
  ChunkId root;
  bool symmetric = false;
};

}  // namespace quadtask
