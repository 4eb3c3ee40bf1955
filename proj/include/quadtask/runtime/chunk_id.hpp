#pragma once

#include <compare>
#include <cstdint>
#include <functional>

namespace quadtask {

using WorkerId = std::int32_t;

// Reads made by the driver outside of any task; never accounted.
inline constexpr WorkerId kUntracked = -1;

// Handle to an immutable registered chunk. The default value is nil, which
// stands for an identically zero submatrix and never resolves in a store.
class ChunkId {
 public:
  constexpr ChunkId() = default;
  constexpr explicit ChunkId(std::uint64_t raw) : raw_(raw) {}

  static constexpr ChunkId nil() { return ChunkId{}; }

  constexpr bool is_nil() const { return raw_ == 0; }
  constexpr std::uint64_t raw() const { return raw_; }

  friend constexpr auto operator<=>(ChunkId, ChunkId) = default;

 private:
  std::uint64_t raw_ = 0;
};

}  // namespace quadtask

template <>
struct std::hash<quadtask::ChunkId> {
  std::size_t operator()(quadtask::ChunkId id) const noexcept {
    return std::hash<std::uint64_t>{}(id.raw());
  }
};
