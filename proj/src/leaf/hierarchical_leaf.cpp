#include "quadtask/leaf/hierarchical_leaf.hpp"

#include <cmath>

#include "quadtask/error.hpp"

namespace quadtask {

using NodePtr = HierarchicalLeaf::NodePtr;
using Node = HierarchicalLeaf::Node;

NodePtr HierarchicalLeaf::make_block(Eigen::MatrixXd block) {
  if ((block.array() == 0.0).all()) return nullptr;
  auto node = std::make_shared<Node>();
  node->norm_squared = block.squaredNorm();
  node->block = std::move(block);
  return node;
}

NodePtr HierarchicalLeaf::make_branch(std::array<NodePtr, 4> children) {
  double s = 0.0;
  bool any = false;
  for (const auto& c : children) {
    if (c) {
      any = true;
      s += c->norm_squared;
    }
  }
  if (!any) return nullptr;
  auto node = std::make_shared<Node>();
  node->children = std::move(children);
  node->norm_squared = s;
  return node;
}

HierarchicalLeaf::HierarchicalLeaf(Index n, Index block_size, NodePtr root)
    : n_(n), block_size_(block_size), root_(std::move(root)) {
  if (n <= 0 || block_size <= 0 || n % block_size != 0) {
    throw InvalidArgument("block size must divide the hierarchical leaf dimension");
  }
  const Index ratio = n / block_size;
  if ((ratio & (ratio - 1)) != 0) {
    throw InvalidArgument("hierarchical leaf dimension must be a power of two times the block size");
  }
}

namespace detail {

namespace {

void check_same_shape(const HierarchicalLeaf& a, const HierarchicalLeaf& b) {
  if (a.dim() != b.dim() || a.block_size() != b.block_size()) {
    throw DimensionMismatch("hierarchical leaves differ in dimension or block size");
  }
}

const NodePtr& child(const NodePtr& node, Transpose t, int i, int k) {
  return is_transposed(t) ? node->children[static_cast<std::size_t>(k * 2 + i)]
                          : node->children[static_cast<std::size_t>(i * 2 + k)];
}

NodePtr scale_node(const NodePtr& a, double alpha) {
  if (!a || alpha == 0.0) return nullptr;
  if (alpha == 1.0) return a;
  if (a->is_block()) return HierarchicalLeaf::make_block(alpha * a->block);
  std::array<NodePtr, 4> c;
  for (std::size_t q = 0; q < 4; ++q) c[q] = scale_node(a->children[q], alpha);
  return HierarchicalLeaf::make_branch(std::move(c));
}

NodePtr add_node(const NodePtr& a, const NodePtr& b, double alpha, double beta) {
  if (!a && !b) return nullptr;
  if (!a) return scale_node(b, beta);
  if (!b) return scale_node(a, alpha);
  if (a->is_block()) return HierarchicalLeaf::make_block(alpha * a->block + beta * b->block);
  std::array<NodePtr, 4> c;
  for (std::size_t q = 0; q < 4; ++q) c[q] = add_node(a->children[q], b->children[q], alpha, beta);
  return HierarchicalLeaf::make_branch(std::move(c));
}

NodePtr multiply_node(const NodePtr& a, Transpose ta, const NodePtr& b, Transpose tb) {
  if (!a || !b) return nullptr;
  if (a->is_block()) {
    const auto& x = a->block;
    const auto& y = b->block;
    Eigen::MatrixXd c(x.rows(), y.cols());
    if (!is_transposed(ta) && !is_transposed(tb)) {
      c.noalias() = x * y;
    } else if (is_transposed(ta) && !is_transposed(tb)) {
      c.noalias() = x.transpose() * y;
    } else if (!is_transposed(ta)) {
      c.noalias() = x * y.transpose();
    } else {
      c.noalias() = x.transpose() * y.transpose();
    }
    return HierarchicalLeaf::make_block(std::move(c));
  }
  std::array<NodePtr, 4> c;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      NodePtr first = multiply_node(child(a, ta, i, 0), ta, child(b, tb, 0, j), tb);
      NodePtr second = multiply_node(child(a, ta, i, 1), ta, child(b, tb, 1, j), tb);
      c[static_cast<std::size_t>(i * 2 + j)] = add_node(first, second, 1.0, 1.0);
    }
  }
  return HierarchicalLeaf::make_branch(std::move(c));
}

void fill_dense(const NodePtr& node, Eigen::MatrixXd& out, Index r0, Index c0, Index size) {
  if (!node) return;
  if (node->is_block()) {
    out.block(r0, c0, size, size) = node->block;
    return;
  }
  const Index h = size / 2;
  for (int q = 0; q < 4; ++q) fill_dense(node->children[static_cast<std::size_t>(q)], out, r0 + (q / 2) * h, c0 + (q % 2) * h, h);
}

NodePtr from_dense_node(const Eigen::MatrixXd& d, Index r0, Index c0, Index size, Index bs) {
  if (size == bs) return HierarchicalLeaf::make_block(Eigen::MatrixXd(d.block(r0, c0, size, size)));
  const Index h = size / 2;
  std::array<NodePtr, 4> c;
  for (int q = 0; q < 4; ++q) c[static_cast<std::size_t>(q)] = from_dense_node(d, r0 + (q / 2) * h, c0 + (q % 2) * h, h, bs);
  return HierarchicalLeaf::make_branch(std::move(c));
}

template <class F>
void for_each_block(const NodePtr& node, F&& f) {
  if (!node) return;
  if (node->is_block()) {
    f(*node);
    return;
  }
  for (const auto& c : node->children) for_each_block(c, f);
}

NodePtr drop_node(const NodePtr& node, double threshold) {
  if (!node) return nullptr;
  if (node->is_block()) return std::sqrt(node->norm_squared) <= threshold ? nullptr : node;
  std::array<NodePtr, 4> c;
  for (std::size_t q = 0; q < 4; ++q) c[q] = drop_node(node->children[q], threshold);
  return HierarchicalLeaf::make_branch(std::move(c));
}

std::size_t node_size(const NodePtr& node, Index bs) {
  if (!node) return 1;
  if (node->is_block()) return 1 + static_cast<std::size_t>(bs * bs) * sizeof(double);
  std::size_t s = 1;
  for (const auto& c : node->children) s += node_size(c, bs);
  return s;
}

enum : std::uint8_t { kNil = 0, kBlock = 1, kBranch = 2 };

void write_node(ByteWriter& out, const NodePtr& node) {
  if (!node) {
    out.u8(kNil);
  } else if (node->is_block()) {
    out.u8(kBlock);
    out.f64s(std::span<const double>(node->block.data(), static_cast<std::size_t>(node->block.size())));
  } else {
    out.u8(kBranch);
    for (const auto& c : node->children) write_node(out, c);
  }
}

NodePtr read_node(ByteReader& in, Index size, Index bs) {
  const std::uint8_t tag = in.u8();
  if (tag == kNil) return nullptr;
  if (tag == kBlock) {
    if (size != bs) throw FormatError("hierarchical block at a non-bottom level");
    Eigen::MatrixXd v(bs, bs);
    in.f64s(std::span<double>(v.data(), static_cast<std::size_t>(v.size())));
    return HierarchicalLeaf::make_block(std::move(v));
  }
  if (tag != kBranch || size == bs) throw FormatError("malformed hierarchical leaf node");
  std::array<NodePtr, 4> c;
  for (auto& x : c) x = read_node(in, size / 2, bs);
  return HierarchicalLeaf::make_branch(std::move(c));
}

}  // namespace

HierarchicalLeaf multiply(const HierarchicalLeaf& a, const HierarchicalLeaf& b, Transpose ta, Transpose tb) {
  check_same_shape(a, b);
  return HierarchicalLeaf(a.dim(), a.block_size(), multiply_node(a.root(), ta, b.root(), tb));
}

HierarchicalLeaf add(const HierarchicalLeaf& a, const HierarchicalLeaf& b, double alpha, double beta) {
  check_same_shape(a, b);
  return HierarchicalLeaf(a.dim(), a.block_size(), add_node(a.root(), b.root(), alpha, beta));
}

HierarchicalLeaf scale(const HierarchicalLeaf& a, double alpha) {
  return HierarchicalLeaf(a.dim(), a.block_size(), scale_node(a.root(), alpha));
}

double norm_squared(const HierarchicalLeaf& a) {
  double s = 0.0;
  for_each_block(a.root(), [&](const Node& n) { s += n.norm_squared; });
  return s;
}

bool is_zero(const HierarchicalLeaf& a) { return !a.root(); }

std::size_t nnz(const HierarchicalLeaf& a) {
  std::size_t n = 0;
  for_each_block(a.root(), [&](const Node& b) { n += static_cast<std::size_t>((b.block.array() != 0.0).count()); });
  return n;
}

Eigen::MatrixXd to_dense(const HierarchicalLeaf& a) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(a.dim(), a.dim());
  fill_dense(a.root(), d, 0, 0, a.dim());
  return d;
}

HierarchicalLeaf hierarchical_from_dense(const Eigen::MatrixXd& dense, Index block_size) {
  HierarchicalLeaf shape(dense.rows(), block_size);
  return HierarchicalLeaf(dense.rows(), block_size, from_dense_node(dense, 0, 0, dense.rows(), block_size));
}

double element(const HierarchicalLeaf& a, Index row, Index col) {
  const NodePtr* node = &a.root();
  Index size = a.dim();
  while (*node) {
    if ((*node)->is_block()) return (*node)->block(row, col);
    size /= 2;
    const int q = static_cast<int>(row >= size) * 2 + static_cast<int>(col >= size);
    if (row >= size) row -= size;
    if (col >= size) col -= size;
    node = &(*node)->children[static_cast<std::size_t>(q)];
  }
  return 0.0;
}

std::vector<double> unit_norms(const HierarchicalLeaf& a) {
  std::vector<double> out;
  for_each_block(a.root(), [&](const Node& n) { out.push_back(std::sqrt(n.norm_squared)); });
  return out;
}

HierarchicalLeaf drop_units(const HierarchicalLeaf& a, double threshold) {
  return HierarchicalLeaf(a.dim(), a.block_size(), drop_node(a.root(), threshold));
}

std::size_t serialized_size(const HierarchicalLeaf& a) { return 1 + 4 + 4 + node_size(a.root(), a.block_size()); }

void write(ByteWriter& out, const HierarchicalLeaf& a) {
  out.u8(static_cast<std::uint8_t>(LeafKind::hierarchical));
  out.u32(static_cast<std::uint32_t>(a.dim()));
  out.u32(static_cast<std::uint32_t>(a.block_size()));
  write_node(out, a.root());
}

HierarchicalLeaf read_hierarchical(ByteReader& in) {
  const Index n = in.u32();
  const Index bs = in.u32();
  HierarchicalLeaf shape(n, bs);
  return HierarchicalLeaf(n, bs, read_node(in, n, bs));
}

}  // namespace detail
}  // namespace quadtask
