#pragma once

#include <any>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "quadtask/runtime/chunk_store.hpp"
#include "quadtask/runtime/event_log.hpp"

namespace quadtask {

enum class ExecutionMode {
  shared_memory,  // one OS thread per worker
  simulate,       // virtual workers interleaved round-robin on the calling thread
};

struct RuntimeConfig {
  std::size_t n_workers = 1;
  std::size_t cache_capacity_bytes = std::size_t{64} << 20;
  std::uint64_t seed = 0;
  ExecutionMode mode = ExecutionMode::simulate;
  std::size_t store_capacity_bytes = ChunkStore::kUnlimited;
  bool record_events = false;
};

struct WorkerStats {
  WorkerId worker = 0;
  std::uint64_t tasks_executed = 0;
  std::uint64_t steals = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
};

struct TaskHandle {
  std::uint64_t id = 0;
  friend constexpr auto operator<=>(TaskHandle, TaskHandle) = default;
};

// Either a chunk that already exists or the future output of a task.
class ChunkRef {
 public:
  ChunkRef() = default;
  ChunkRef(ChunkId id) : chunk_(id) {}  // NOLINT(google-explicit-constructor)
  ChunkRef(TaskHandle task) : task_(task), pending_(true) {}  // NOLINT(google-explicit-constructor)

  bool is_ready() const { return !pending_; }
  ChunkId chunk() const { return chunk_; }
  TaskHandle task() const { return task_; }

 private:
  ChunkId chunk_;
  TaskHandle task_;
  bool pending_ = false;
};

class TaskContext;
using TaskBody = std::function<ChunkRef(TaskContext&)>;

// A task type has a regular body and a fallback body; the runtime calls the
// fallback whenever one of the resolved inputs is nil.
struct TaskType {
  std::string name;
  TaskBody execute;
  TaskBody fallback;
};

struct TaskSpec {
  std::string task_type;
  std::vector<ChunkRef> inputs;
  std::any params;
};

class Runtime {
 public:
  explicit Runtime(RuntimeConfig config = {});
  ~Runtime();

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  const RuntimeConfig& config() const;

  void add_task_type(TaskType type);
  bool has_task_type(std::string_view name) const;

  ChunkId register_chunk(Bytes payload, WorkerId worker);
  ChunkId register_object(std::shared_ptr<const ChunkPayload> payload, WorkerId worker, double summary = 0.0,
                          std::size_t weight = 0);

  // Accounted reads: a read by a worker other than the owner goes through that
  // worker's cache and counts as received bytes on a miss. kUntracked skips
  // accounting.
  Bytes get_chunk(ChunkId id, WorkerId reader);
  std::shared_ptr<const ChunkPayload> fetch_payload(ChunkId id, WorkerId reader);

  // T must provide `static std::shared_ptr<const T> decode(std::span<const std::byte>)`.
  template <class T>
  std::shared_ptr<const T> fetch(ChunkId id, WorkerId reader) {
    auto payload = fetch_payload(id, reader);
    if (auto typed = std::dynamic_pointer_cast<const T>(payload)) return typed;
    if (auto raw = std::dynamic_pointer_cast<const RawPayload>(payload)) return T::decode(raw->bytes());
    throw FormatError("chunk " + std::to_string(id.raw()) + " holds an unexpected payload type");
  }

  double summary(ChunkId id) const;
  std::size_t weight(ChunkId id) const;
  WorkerId owner(ChunkId id) const;
  void release(ChunkId id);

  TaskHandle register_task(TaskSpec spec, WorkerId worker = 0);
  std::vector<WorkerStats> run_to_completion();
  ChunkId result(TaskHandle handle) const;

  std::vector<WorkerStats> stats() const;
  void reset_stats();

  ChunkStore& store();
  const ChunkStore& store() const;
  EventLog& events();

  struct Task;  // opaque task record

 private:
  friend class TaskContext;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class TaskContext {
 public:
  WorkerId worker() const { return worker_; }
  TaskHandle handle() const;
  int depth() const;

  std::span<const ChunkId> inputs() const;
  ChunkId input(std::size_t i) const { return inputs()[i]; }

  template <class P>
  const P& params() const {
    return std::any_cast<const P&>(params_ref());
  }

  template <class T>
  std::shared_ptr<const T> fetch(ChunkId id) {
    return runtime_.fetch<T>(id, worker_);
  }

  double summary(ChunkId id) const { return runtime_.summary(id); }
  std::size_t weight(ChunkId id) const { return runtime_.weight(id); }
  WorkerId owner(ChunkId id) const { return runtime_.owner(id); }
  ChunkId register_chunk(std::shared_ptr<const ChunkPayload> payload, double summary = 0.0, std::size_t weight = 0);
  TaskHandle register_task(std::string_view type, std::vector<ChunkRef> inputs, std::any params = {});
  void release(ChunkId id) { runtime_.release(id); }

 private:
  friend class Runtime;
  TaskContext(Runtime& rt, Runtime::Task& task, WorkerId worker) : runtime_(rt), task_(task), worker_(worker) {}
  const std::any& params_ref() const;

  Runtime& runtime_;
  Runtime::Task& task_;
  WorkerId worker_;
};

}  // namespace quadtask
