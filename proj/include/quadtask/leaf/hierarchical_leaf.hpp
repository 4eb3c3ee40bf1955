#pragma once

#include <array>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "quadtask/bytes.hpp"
#include "quadtask/leaf/leaf_types.hpp"

namespace quadtask {

// Leaf represented as its own sparse quadtree that bottoms out in dense
// blocks. A null node is an exactly zero quadrant.
class HierarchicalLeaf {
 public:
  struct Node;
  using NodePtr = std::shared_ptr<const Node>;

  struct Node {
    Eigen::MatrixXd block;              // set on bottom-level nodes only
    std::array<NodePtr, 4> children{};  // NW, NE, SW, SE on inner nodes
    double norm_squared = 0.0;

    bool is_block() const { return block.size() > 0; }
  };

  // nullptr when the block is exactly zero.
  static NodePtr make_block(Eigen::MatrixXd block);
  // nullptr when all four children are null.
  static NodePtr make_branch(std::array<NodePtr, 4> children);

  HierarchicalLeaf(Index n, Index block_size, NodePtr root = nullptr);

  Index dim() const { return n_; }
  Index block_size() const { return block_size_; }
  const NodePtr& root() const { return root_; }

 private:
  Index n_;
  Index block_size_;
  NodePtr root_;
};

namespace detail {

HierarchicalLeaf multiply(const HierarchicalLeaf& a, const HierarchicalLeaf& b, Transpose ta, Transpose tb);
HierarchicalLeaf add(const HierarchicalLeaf& a, const HierarchicalLeaf& b, double alpha, double beta);
HierarchicalLeaf scale(const HierarchicalLeaf& a, double alpha);
double norm_squared(const HierarchicalLeaf& a);
bool is_zero(const HierarchicalLeaf& a);
std::size_t nnz(const HierarchicalLeaf& a);
Eigen::MatrixXd to_dense(const HierarchicalLeaf& a);
HierarchicalLeaf hierarchical_from_dense(const Eigen::MatrixXd& dense, Index block_size);
double element(const HierarchicalLeaf& a, Index row, Index col);

// Truncation units are the bottom-level blocks.
std::vector<double> unit_norms(const HierarchicalLeaf& a);
HierarchicalLeaf drop_units(const HierarchicalLeaf& a, double threshold);

std::size_t serialized_size(const HierarchicalLeaf& a);
void write(ByteWriter& out, const HierarchicalLeaf& a);
HierarchicalLeaf read_hierarchical(ByteReader& in);

}  // namespace detail
}  // namespace quadtask
