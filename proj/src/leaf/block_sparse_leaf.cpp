#include "quadtask/leaf/block_sparse_leaf.hpp"

#include <optional>

#include "quadtask/error.hpp"

namespace quadtask {

BlockSparseLeaf::BlockSparseLeaf(Index n, Index block_size) : n_(n), block_size_(block_size) {
  if (n <= 0 || block_size <= 0 || n % block_size != 0) {
    throw InvalidArgument("block size " + std::to_string(block_size) + " must divide leaf dimension " +
                          std::to_string(n));
  }
  grid_ = n / block_size;
  slot_.assign(static_cast<std::size_t>(grid_ * grid_), -1);
}

void BlockSparseLeaf::set_block(Index bi, Index bj, Eigen::MatrixXd values) {
  const double norm = values.norm();
  set_block(bi, bj, std::move(values), norm);
}

void BlockSparseLeaf::set_block(Index bi, Index bj, Eigen::MatrixXd values, double norm) {
  if (values.rows() != block_size_ || values.cols() != block_size_) {
    throw DimensionMismatch("block shape does not match the leaf block size");
  }
  if ((values.array() == 0.0).all()) {
    erase_block(bi, bj);
    return;
  }
  std::int32_t& s = slot_[static_cast<std::size_t>(bi + bj * grid_)];
  if (s >= 0) {
    blocks_[static_cast<std::size_t>(s)].values = std::move(values);
    blocks_[static_cast<std::size_t>(s)].norm = norm;
    return;
  }
  s = static_cast<std::int32_t>(blocks_.size());
  blocks_.push_back(Entry{bi, bj, std::move(values), norm});
}

void BlockSparseLeaf::erase_block(Index bi, Index bj) {
  std::int32_t& s = slot_[static_cast<std::size_t>(bi + bj * grid_)];
  if (s < 0) return;
  const auto pos = static_cast<std::size_t>(s);
  if (pos + 1 != blocks_.size()) {
    blocks_[pos] = std::move(blocks_.back());
    slot_[static_cast<std::size_t>(blocks_[pos].bi + blocks_[pos].bj * grid_)] = s;
  }
  blocks_.pop_back();
  s = -1;
}

namespace detail {

namespace {

void check_same_shape(const BlockSparseLeaf& a, const BlockSparseLeaf& b) {
  if (a.dim() != b.dim() || a.block_size() != b.block_size()) {
    throw DimensionMismatch("block-sparse leaves differ in dimension or block size");
  }
}

}  // namespace

BlockSparseLeaf multiply(const BlockSparseLeaf& a, const BlockSparseLeaf& b, Transpose ta, Transpose tb) {
  check_same_shape(a, b);
  const Index g = a.grid_dim();
  const Index bs = a.block_size();
  auto op_a = [&](Index i, Index k) { return is_transposed(ta) ? a.block(k, i) : a.block(i, k); };
  auto op_b = [&](Index k, Index j) { return is_transposed(tb) ? b.block(j, k) : b.block(k, j); };

  BlockSparseLeaf c(a.dim(), bs);
  for (Index bj = 0; bj < g; ++bj) {
    for (Index bi = 0; bi < g; ++bi) {
      std::optional<Eigen::MatrixXd> acc;
      for (Index bk = 0; bk < g; ++bk) {
        const Eigen::MatrixXd* x = op_a(bi, bk);
        if (x == nullptr) continue;
        const Eigen::MatrixXd* y = op_b(bk, bj);
        if (y == nullptr) continue;
        if (!acc) acc = Eigen::MatrixXd::Zero(bs, bs);
        if (!is_transposed(ta) && !is_transposed(tb)) {
          acc->noalias() += *x * *y;
        } else if (is_transposed(ta) && !is_transposed(tb)) {
          acc->noalias() += x->transpose() * *y;
        } else if (!is_transposed(ta)) {
          acc->noalias() += *x * y->transpose();
        } else {
          acc->noalias() += x->transpose() * y->transpose();
        }
      }
      if (acc) c.set_block(bi, bj, std::move(*acc));
    }
  }
  return c;
}

BlockSparseLeaf add(const BlockSparseLeaf& a, const BlockSparseLeaf& b, double alpha, double beta) {
  check_same_shape(a, b);
  BlockSparseLeaf c(a.dim(), a.block_size());
  const Index g = a.grid_dim();
  for (Index bj = 0; bj < g; ++bj) {
    for (Index bi = 0; bi < g; ++bi) {
      const Eigen::MatrixXd* x = a.block(bi, bj);
      const Eigen::MatrixXd* y = b.block(bi, bj);
      if (x != nullptr && y != nullptr) {
        c.set_block(bi, bj, alpha * *x + beta * *y);
      } else if (x != nullptr) {
        c.set_block(bi, bj, alpha * *x);
      } else if (y != nullptr) {
        c.set_block(bi, bj, beta * *y);
      }
    }
  }
  return c;
}

BlockSparseLeaf scale(const BlockSparseLeaf& a, double alpha) {
  BlockSparseLeaf c(a.dim(), a.block_size());
  if (alpha == 0.0) return c;
  a.for_each_block([&](Index bi, Index bj, const Eigen::MatrixXd& v, double) { c.set_block(bi, bj, alpha * v); });
  return c;
}

double norm_squared(const BlockSparseLeaf& a) {
  double s = 0.0;
  a.for_each_block([&](Index, Index, const Eigen::MatrixXd&, double norm) { s += norm * norm; });
  return s;
}

bool is_zero(const BlockSparseLeaf& a) { return a.stored_blocks() == 0; }

std::size_t nnz(const BlockSparseLeaf& a) {
  std::size_t n = 0;
  a.for_each_block([&](Index, Index, const Eigen::MatrixXd& v, double) {
    n += static_cast<std::size_t>((v.array() != 0.0).count());
  });
  return n;
}

Eigen::MatrixXd to_dense(const BlockSparseLeaf& a) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(a.dim(), a.dim());
  const Index bs = a.block_size();
  a.for_each_block(
      [&](Index bi, Index bj, const Eigen::MatrixXd& v, double) { d.block(bi * bs, bj * bs, bs, bs) = v; });
  return d;
}

BlockSparseLeaf block_sparse_from_dense(const Eigen::MatrixXd& dense, Index block_size) {
  BlockSparseLeaf c(dense.rows(), block_size);
  for (Index bj = 0; bj < c.grid_dim(); ++bj) {
    for (Index bi = 0; bi < c.grid_dim(); ++bi) {
      auto blk = dense.block(bi * block_size, bj * block_size, block_size, block_size);
      if ((blk.array() != 0.0).any()) c.set_block(bi, bj, Eigen::MatrixXd(blk));
    }
  }
  return c;
}

double element(const BlockSparseLeaf& a, Index row, Index col) {
  const Index bs = a.block_size();
  const Eigen::MatrixXd* blk = a.block(row / bs, col / bs);
  return blk == nullptr ? 0.0 : (*blk)(row % bs, col % bs);
}

std::vector<double> unit_norms(const BlockSparseLeaf& a) {
  std::vector<double> out;
  out.reserve(a.stored_blocks());
  a.for_each_block([&](Index, Index, const Eigen::MatrixXd&, double norm) { out.push_back(norm); });
  return out;
}

BlockSparseLeaf drop_units(const BlockSparseLeaf& a, double threshold) {
  BlockSparseLeaf c(a.dim(), a.block_size());
  a.for_each_block([&](Index bi, Index bj, const Eigen::MatrixXd& v, double norm) {
    if (norm > threshold) c.set_block(bi, bj, v, norm);
  });
  return c;
}

std::size_t serialized_size(const BlockSparseLeaf& a) {
  const auto per_block = 4 + 4 + 8 + static_cast<std::size_t>(a.block_size() * a.block_size()) * sizeof(double);
  return 1 + 4 + 4 + 4 + a.stored_blocks() * per_block;
}

void write(ByteWriter& out, const BlockSparseLeaf& a) {
  out.u8(static_cast<std::uint8_t>(LeafKind::block_sparse));
  out.u32(static_cast<std::uint32_t>(a.dim()));
  out.u32(static_cast<std::uint32_t>(a.block_size()));
  out.u32(static_cast<std::uint32_t>(a.stored_blocks()));
  a.for_each_block([&](Index bi, Index bj, const Eigen::MatrixXd& v, double norm) {
    out.u32(static_cast<std::uint32_t>(bi));
    out.u32(static_cast<std::uint32_t>(bj));
    out.f64(norm);
    out.f64s(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
  });
}

BlockSparseLeaf read_block_sparse(ByteReader& in) {
  const Index n = in.u32();
  const Index bs = in.u32();
  const std::uint32_t count = in.u32();
  BlockSparseLeaf c(n, bs);
  for (std::uint32_t i = 0; i < count; ++i) {
    const Index bi = in.u32();
    const Index bj = in.u32();
    const double norm = in.f64();
    if (bi >= c.grid_dim() || bj >= c.grid_dim()) throw FormatError("block index outside the leaf grid");
    Eigen::MatrixXd v(bs, bs);
    in.f64s(std::span<double>(v.data(), static_cast<std::size_t>(v.size())));
    c.set_block(bi, bj, std::move(v), norm);
  }
  return c;
}

}  // namespace detail
}  // namespace quadtask
