#pragma once

#include <array>
#include <memory>
#include <span>
#include <variant>

#include "quadtask/leaf/leaf.hpp"
#include "quadtask/runtime/chunk_store.hpp"

namespace quadtask {

// Quadrant positions, row-major: (0,0), (0,1), (1,0), (1,1).
enum Quadrant : int { nw = 0, ne = 1, sw = 2, se = 3 };

constexpr int quadrant(int i, int j) { return 2 * i + j; }

// One chunk of a quadtree matrix: a leaf matrix at the bottom level, four
// child handles everywhere else.
class QuadNode final : public ChunkPayload {
 public:
  using Children = std::array<ChunkId, 4>;

  QuadNode(int level, Leaf leaf);
  QuadNode(int level, Children children);

  int level() const { return level_; }
  bool is_leaf() const { return std::holds_alternative<Leaf>(content_); }
  const Leaf& leaf() const;
  const Children& children() const;
  ChunkId child(int i, int j) const { return children()[quadrant(i, j)]; }

  std::size_t size_bytes() const override { return size_; }
  void serialize(ByteWriter& out) const override;

  static std::shared_ptr<const QuadNode> decode(std::span<const std::byte> in);

 private:
  int level_;
  std::variant<Leaf, Children> content_;
  std::size_t size_;
};

}  // namespace quadtask
