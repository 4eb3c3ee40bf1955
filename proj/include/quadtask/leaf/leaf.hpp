#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "quadtask/leaf/block_sparse_leaf.hpp"
#include "quadtask/leaf/dense_leaf.hpp"
#include "quadtask/leaf/hierarchical_leaf.hpp"
#include "quadtask/leaf/leaf_types.hpp"

namespace quadtask {

// One leaf payload of a quadtree matrix. A whole tree uses a single kind;
// combining two kinds is a configuration error.
using Leaf = std::variant<DenseLeaf, BlockSparseLeaf, HierarchicalLeaf>;

struct LeafShape {
  LeafKind kind = LeafKind::block_sparse;
  Index n = 256;
  Index block_size = 64;

  friend bool operator==(const LeafShape&, const LeafShape&) = default;
};

LeafKind kind_of(const Leaf& a);
LeafShape shape_of(const Leaf& a);
void validate(const LeafShape& shape);

Leaf leaf_zero(const LeafShape& shape);
Leaf leaf_from_dense(const LeafShape& shape, const Eigen::MatrixXd& dense);
Eigen::MatrixXd leaf_to_dense(const Leaf& a);

// Duplicate coordinates are summed in input order.
Leaf leaf_from_triplets(const LeafShape& shape, std::span<const Triplet> entries);
std::vector<double> leaf_get_elements(const Leaf& a, std::span<const Coord> indices);

Leaf leaf_multiply(const Leaf& a, const Leaf& b, Transpose ta = Transpose::no, Transpose tb = Transpose::no);
Leaf leaf_add(const Leaf& a, const Leaf& b, double alpha = 1.0, double beta = 1.0);
Leaf leaf_scale(const Leaf& a, double alpha);

double leaf_norm_squared(const Leaf& a);
double leaf_norm_frobenius(const Leaf& a);
bool leaf_is_zero(const Leaf& a);
std::size_t leaf_nnz(const Leaf& a);

// Truncation units: elements for dense leaves, stored blocks otherwise.
std::vector<double> leaf_unit_norms(const Leaf& a);
Leaf leaf_drop_units(const Leaf& a, double threshold);

// Largest norm value v such that all units with norm <= v have squared norms
// summing to at most tau^2. Units sharing a norm value are dropped together.
// nullopt when nothing can be dropped.
std::optional<double> truncation_threshold(std::vector<double> norms, double tau);

struct LeafTruncation {
  Leaf leaf;
  double removed_norm = 0.0;
};

LeafTruncation leaf_truncate(const Leaf& a, double tau);

// Helpers for upper-triangle storage of symmetric matrices.
Leaf leaf_upper(const Leaf& a);
Leaf leaf_symmetrize(const Leaf& upper);

// Adds c to the first `extent` diagonal entries.
Leaf leaf_add_identity(const Leaf& a, double c, Index extent);

// Z (upper triangular) with Z^T A Z = I on the leading extent x extent part,
// A given by its upper triangle. Throws NotPositiveDefinite with the local
// pivot index.
Leaf leaf_inverse_cholesky(const Leaf& upper, Index extent);

std::size_t leaf_serialized_size(const Leaf& a);
void write_leaf(ByteWriter& out, const Leaf& a);
Leaf read_leaf(ByteReader& in);

}  // namespace quadtask
