#include "quadtask/runtime/chunk_store.hpp"

#include <mutex>
#include <string>

#include "quadtask/error.hpp"

namespace quadtask {

namespace {

constexpr int kTagShift = 44;
constexpr std::uint64_t kCounterMask = (std::uint64_t{1} << kTagShift) - 1;

std::uint64_t next_store_tag() {
  static std::atomic<std::uint64_t> tags{1};
  return tags.fetch_add(1) & ((std::uint64_t{1} << (64 - kTagShift)) - 1);
}

std::string describe(ChunkId id) { return "chunk " + std::to_string(id.raw()); }

}  // namespace

Bytes ChunkPayload::to_bytes() const {
  ByteWriter w;
  w.reserve(size_bytes());
  serialize(w);
  return w.take();
}

void RawPayload::serialize(ByteWriter& out) const {
  out.raw(bytes_);
}

ChunkStore::ChunkStore(std::size_t capacity_bytes) : tag_(next_store_tag()), capacity_(capacity_bytes) {}

ChunkId ChunkStore::insert(std::shared_ptr<const ChunkPayload> payload, WorkerId owner, double summary,
                           std::size_t weight) {
  if (!payload) throw ContractViolation("cannot register an empty chunk");
  const std::size_t size = payload->size_bytes();
  if (size == 0) throw ContractViolation("cannot register an empty chunk");

  const std::uint64_t counter = next_.fetch_add(1);
  if (counter > kCounterMask) throw OutOfMemory("chunk identifier space exhausted");
  const ChunkId id{(tag_ << kTagShift) | counter};

  std::unique_lock lock(mutex_);
  if (capacity_ != kUnlimited && bytes_ + size > capacity_) {
    throw OutOfMemory("chunk store capacity of " + std::to_string(capacity_) +
                      " bytes exhausted (in use " + std::to_string(bytes_) + ", requested " +
                      std::to_string(size) + ")");
  }
  chunks_.emplace(id, ChunkRecord{std::move(payload), size, owner, summary, weight == 0 ? size : weight});
  bytes_ += size;
  return id;
}

ChunkRecord ChunkStore::lookup(ChunkId id) const {
  if (id.is_nil()) throw ContractViolation("nil chunk identifier cannot be dereferenced");
  std::shared_lock lock(mutex_);
  auto it = chunks_.find(id);
  if (it == chunks_.end()) throw InvalidHandle(describe(id) + " is not registered in this store");
  return it->second;
}

bool ChunkStore::contains(ChunkId id) const {
  if (id.is_nil()) return false;
  std::shared_lock lock(mutex_);
  return chunks_.contains(id);
}

void ChunkStore::erase(ChunkId id) {
  if (id.is_nil()) throw ContractViolation("nil chunk identifier cannot be released");
  std::unique_lock lock(mutex_);
  auto it = chunks_.find(id);
  if (it == chunks_.end()) throw InvalidHandle(describe(id) + " is not registered in this store");
  bytes_ -= it->second.size_bytes;
  chunks_.erase(it);
}

std::size_t ChunkStore::bytes_in_use() const {
  std::shared_lock lock(mutex_);
  return bytes_;
}

std::size_t ChunkStore::chunk_count() const {
  std::shared_lock lock(mutex_);
  return chunks_.size();
}

}  // namespace quadtask
