#include "quadtask/runtime/event_log.hpp"

#include <ostream>

namespace quadtask {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::register_task: return "register_task";
    case EventKind::execute: return "execute";
    case EventKind::steal: return "steal";
    case EventKind::fetch_hit: return "fetch_hit";
    case EventKind::fetch_miss: return "fetch_miss";
    case EventKind::register_chunk: return "register_chunk";
    case EventKind::release_chunk: return "release_chunk";
  }
  return "unknown";
}

void EventLog::record(const Event& e) {
  std::lock_guard lock(mutex_);
  events_.push_back(e);
}

void EventLog::clear() {
  std::lock_guard lock(mutex_);
  events_.clear();
}

std::vector<Event> EventLog::snapshot() const {
  std::lock_guard lock(mutex_);
  return events_;
}

void EventLog::write(std::ostream& os) const {
  std::lock_guard lock(mutex_);
  for (const Event& e : events_) {
    os << to_string(e.kind) << ',' << e.worker << ',' << e.task_id << ',' << e.depth << ','
       << e.chunk_id << ',' << e.bytes << '\n';
  }
}

}  // namespace quadtask
