#pragma once

#include <cstdint>
#include <string_view>

#include <Eigen/Core>

namespace quadtask {

using Index = Eigen::Index;

enum class LeafKind : std::uint8_t { dense = 0, block_sparse = 1, hierarchical = 2 };

std::string_view to_string(LeafKind kind);
LeafKind parse_leaf_kind(std::string_view text);

enum class Transpose : bool { no = false, yes = true };

constexpr Transpose flip(Transpose t) { return t == Transpose::no ? Transpose::yes : Transpose::no; }
constexpr bool is_transposed(Transpose t) { return t == Transpose::yes; }

struct Triplet {
  Index row = 0;
  Index col = 0;
  double value = 0.0;
};

struct Coord {
  Index row = 0;
  Index col = 0;
};

}  // namespace quadtask
