#include "quadtask/matrix/quad_node.hpp"

#include "quadtask/error.hpp"

namespace quadtask {
namespace {

constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kLeafTag = 0;
constexpr std::uint8_t kBranchTag = 1;
constexpr std::size_t kHeader = 1 + 1 + 4;

}  // namespace

QuadNode::QuadNode(int level, Leaf leaf) : level_(level), content_(std::move(leaf)) {
  size_ = kHeader + leaf_serialized_size(std::get<Leaf>(content_));
}

QuadNode::QuadNode(int level, Children children) : level_(level), content_(children) {
  size_ = kHeader + 4 * 8;
}

const Leaf& QuadNode::leaf() const {
  if (!is_leaf()) throw ContractViolation("quadtree node at level " + std::to_string(level_) + " is a branch");
  return std::get<Leaf>(content_);
}

const QuadNode::Children& QuadNode::children() const {
  if (is_leaf()) throw ContractViolation("quadtree node at level " + std::to_string(level_) + " is a leaf");
  return std::get<Children>(content_);
}

void QuadNode::serialize(ByteWriter& out) const {
  out.u8(kVersion);
  out.u8(is_leaf() ? kLeafTag : kBranchTag);
  out.u32(static_cast<std::uint32_t>(level_));
  if (is_leaf()) {
    write_leaf(out, leaf());
  } else {
    for (ChunkId c : children()) out.u64(c.raw());
  }
}

std::shared_ptr<const QuadNode> QuadNode::decode(std::span<const std::byte> in) {
  ByteReader r(in);
  if (r.u8() != kVersion) throw FormatError("unsupported quadtree node version");
  const std::uint8_t tag = r.u8();
  const int level = static_cast<int>(r.u32());
  std::shared_ptr<const QuadNode> node;
  if (tag == kLeafTag) {
    node = std::make_shared<QuadNode>(level, read_leaf(r));
  } else if (tag == kBranchTag) {
    Children c;
    for (auto& id : c) id = ChunkId(r.u64());
    node = std::make_shared<QuadNode>(level, c);
  } else {
    throw FormatError("unknown quadtree node tag");
  }
  if (!r.at_end()) throw FormatError("trailing bytes after quadtree node");
  return node;
}

}  // namespace quadtask
