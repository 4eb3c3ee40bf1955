#pragma once

#include <atomic>
#include <cstddef>
#include <limits>
#include <memory>
#include <shared_mutex>
#include <unordered_map>

#include "quadtask/bytes.hpp"
#include "quadtask/runtime/chunk_id.hpp"

namespace quadtask {

// Anything that can live in a chunk. size_bytes() must equal the length of
// what serialize() writes.
class ChunkPayload {
 public:
  virtual ~ChunkPayload() = default;
  virtual std::size_t size_bytes() const = 0;
  virtual void serialize(ByteWriter& out) const = 0;

  Bytes to_bytes() const;
};

// Opaque byte payload registered through the raw interface.
class RawPayload final : public ChunkPayload {
 public:
  explicit RawPayload(Bytes bytes) : bytes_(std::move(bytes)) {}

  std::size_t size_bytes() const override { return bytes_.size(); }
  void serialize(ByteWriter& out) const override;
  const Bytes& bytes() const { return bytes_; }

  static std::shared_ptr<const RawPayload> decode(std::span<const std::byte> in) {
    return std::make_shared<RawPayload>(Bytes(in.begin(), in.end()));
  }

 private:
  Bytes bytes_;
};

struct ChunkRecord {
  std::shared_ptr<const ChunkPayload> payload;
  std::size_t size_bytes = 0;
  WorkerId owner = 0;
  // Scalar carried with the handle and readable without a transfer. The
  // matrix layer stores the squared Frobenius norm of the subtree here.
  double summary = 0.0;
  // Bytes reachable from this chunk, its own included; also transfer-free.
  // Defaults to size_bytes. The matrix layer stores subtree bytes here.
  std::size_t weight = 0;
};

// Thread-safe registry of immutable chunks. Identifiers carry a per-store tag
// so a handle issued by another store is rejected instead of aliasing.
class ChunkStore {
 public:
  static constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

  explicit ChunkStore(std::size_t capacity_bytes = kUnlimited);

  ChunkStore(const ChunkStore&) = delete;
  ChunkStore& operator=(const ChunkStore&) = delete;

  ChunkId insert(std::shared_ptr<const ChunkPayload> payload, WorkerId owner, double summary = 0.0,
                 std::size_t weight = 0);

  // Throws ContractViolation for nil and InvalidHandle for foreign or
  // released identifiers.
  ChunkRecord lookup(ChunkId id) const;
  bool contains(ChunkId id) const;

  // Drops a chunk that is known to have no remaining readers.
  void erase(ChunkId id);

  std::size_t bytes_in_use() const;
  std::size_t chunk_count() const;
  std::size_t capacity_bytes() const { return capacity_; }

 private:
  std::uint64_t tag_;
  std::size_t capacity_;
  std::atomic<std::uint64_t> next_{1};
  mutable std::shared_mutex mutex_;
  std::unordered_map<ChunkId, ChunkRecord> chunks_;
  std::size_t bytes_ = 0;
};

}  // namespace quadtask
