#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "quadtask/bytes.hpp"
#include "quadtask/leaf/leaf_types.hpp"

namespace quadtask {

// Leaf split into a grid of uniform square blocks. Only blocks with at least
// one nonzero element are stored; each stored block carries its Frobenius norm.
class BlockSparseLeaf {
 public:
  BlockSparseLeaf(Index n, Index block_size);

  Index dim() const { return n_; }
  Index block_size() const { return block_size_; }
  Index grid_dim() const { return grid_; }
  std::size_t stored_blocks() const { return blocks_.size(); }

  const Eigen::MatrixXd* block(Index bi, Index bj) const {
    const std::int32_t s = slot_[static_cast<std::size_t>(bi + bj * grid_)];
    return s < 0 ? nullptr : &blocks_[static_cast<std::size_t>(s)].values;
  }

  double block_norm(Index bi, Index bj) const {
    const std::int32_t s = slot_[static_cast<std::size_t>(bi + bj * grid_)];
    return s < 0 ? 0.0 : blocks_[static_cast<std::size_t>(s)].norm;
  }

  // Stores (or replaces) block (bi, bj); an exactly zero block is removed
  // instead.
  void set_block(Index bi, Index bj, Eigen::MatrixXd values);
  void set_block(Index bi, Index bj, Eigen::MatrixXd values, double norm);

  // Visits stored blocks in column-major grid order.
  template <class F>
  void for_each_block(F&& f) const {
    for (Index bj = 0; bj < grid_; ++bj) {
      for (Index bi = 0; bi < grid_; ++bi) {
        const std::int32_t s = slot_[static_cast<std::size_t>(bi + bj * grid_)];
        if (s >= 0) {
          const Entry& e = blocks_[static_cast<std::size_t>(s)];
          f(bi, bj, e.values, e.norm);
        }
      }
    }
  }

 private:
  struct Entry {
    Index bi;
    Index bj;
    Eigen::MatrixXd values;
    double norm;
  };

  void erase_block(Index bi, Index bj);

  Index n_;
  Index block_size_;
  Index grid_;
  std::vector<std::int32_t> slot_;
  std::vector<Entry> blocks_;
};

namespace detail {

BlockSparseLeaf multiply(const BlockSparseLeaf& a, const BlockSparseLeaf& b, Transpose ta, Transpose tb);
BlockSparseLeaf add(const BlockSparseLeaf& a, const BlockSparseLeaf& b, double alpha, double beta);
BlockSparseLeaf scale(const BlockSparseLeaf& a, double alpha);
double norm_squared(const BlockSparseLeaf& a);
bool is_zero(const BlockSparseLeaf& a);
std::size_t nnz(const BlockSparseLeaf& a);
Eigen::MatrixXd to_dense(const BlockSparseLeaf& a);
BlockSparseLeaf block_sparse_from_dense(const Eigen::MatrixXd& dense, Index block_size);
double element(const BlockSparseLeaf& a, Index row, Index col);

std::vector<double> unit_norms(const BlockSparseLeaf& a);
BlockSparseLeaf drop_units(const BlockSparseLeaf& a, double threshold);

std::size_t serialized_size(const BlockSparseLeaf& a);
void write(ByteWriter& out, const BlockSparseLeaf& a);
BlockSparseLeaf read_block_sparse(ByteReader& in);

}  // namespace detail
}  // namespace quadtask
