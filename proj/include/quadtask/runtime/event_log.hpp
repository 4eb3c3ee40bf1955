#pragma once

#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <string_view>
#include <vector>

#include "quadtask/runtime/chunk_id.hpp"

namespace quadtask {

// Record schema, one line per event:
//
//   event_kind,worker,task_id,depth,chunk_id,bytes
//
// task_id is 0 and depth is -1 when the event is not tied to a task; chunk_id
// is the raw handle value (0 for nil). For `steal` events chunk_id holds the
// victim worker and bytes the smallest task depth queued on the victim at the
// moment of the steal.
enum class EventKind : std::uint8_t {
  register_task,
  execute,
  steal,
  fetch_hit,
  fetch_miss,
  register_chunk,
  release_chunk,
};

std::string_view to_string(EventKind kind);

struct Event {
  EventKind kind;
  WorkerId worker;
  std::uint64_t task_id;
  std::int32_t depth;
  std::uint64_t chunk_id;
  std::uint64_t bytes;
};

class EventLog {
 public:
  void record(const Event& e);
  void clear();
  std::vector<Event> snapshot() const;
  void write(std::ostream& os) const;

 private:
  mutable std::mutex mutex_;
  std::vector<Event> events_;
};

}  // namespace quadtask
