#include "quadtask/runtime/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <exception>
#include <list>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "quadtask/error.hpp"

namespace quadtask {

namespace {

// Least-recently-used set of remote chunk ids bounded by total bytes.
class LruCache {
 public:
  explicit LruCache(std::size_t capacity) : capacity_(capacity) {}

  bool touch(ChunkId id) {
    auto it = index_.find(id);
    if (it == index_.end()) return false;
    order_.splice(order_.begin(), order_, it->second.first);
    return true;
  }

  void insert(ChunkId id, std::size_t size) {
    while (!order_.empty() && bytes_ + size > capacity_) {
      const ChunkId victim = order_.back();
      bytes_ -= index_.at(victim).second;
      index_.erase(victim);
      order_.pop_back();
    }
    order_.push_front(id);
    index_.emplace(id, std::make_pair(order_.begin(), size));
    bytes_ += size;
  }

  void erase(ChunkId id) {
    auto it = index_.find(id);
    if (it == index_.end()) return;
    bytes_ -= it->second.second;
    order_.erase(it->second.first);
    index_.erase(it);
  }

  void clear() {
    order_.clear();
    index_.clear();
    bytes_ = 0;
  }

 private:
  std::size_t capacity_;
  std::size_t bytes_ = 0;
  std::list<ChunkId> order_;
  std::unordered_map<ChunkId, std::pair<std::list<ChunkId>::iterator, std::size_t>> index_;
};

}  // namespace

struct Runtime::Task {
  std::uint64_t id = 0;
  const TaskType* type = nullptr;
  std::vector<ChunkId> inputs;
  std::any params;
  int depth = 0;
  std::uint64_t parent = 0;
  WorkerId home = 0;  // registering worker; the task is queued there
  int pending = 0;
  bool executed = false;
  bool done = false;
  ChunkId result;
  // (owner, weight) of each non-nil input, filled when the task is queued.
  std::vector<std::pair<WorkerId, std::size_t>> placement;
  // (waiting task, input slot); slot -1 means the waiter forwards this output.
  std::vector<std::pair<Task*, int>> waiters;
};

struct Worker {
  explicit Worker(WorkerId id, std::size_t cache_capacity, std::uint64_t seed)
      : cache(cache_capacity), rng(seed) {
    stats.worker = id;
  }

  std::mutex queue_mutex;
  std::deque<Runtime::Task*> queue;

  std::mutex cache_mutex;
  LruCache cache;
  WorkerStats stats;

  std::mt19937_64 rng;
};

struct Runtime::Impl {
  explicit Impl(RuntimeConfig cfg) : config(cfg), store(cfg.store_capacity_bytes) {
    if (config.n_workers == 0) throw ConfigError("n_workers must be at least 1");
    for (std::size_t w = 0; w < config.n_workers; ++w) {
      workers.push_back(std::make_unique<Worker>(static_cast<WorkerId>(w), config.cache_capacity_bytes,
                                                 config.seed * 0x9E3779B97F4A7C15ULL + w + 1));
    }
  }

  RuntimeConfig config;
  ChunkStore store;
  EventLog log;
  std::map<std::string, TaskType, std::less<>> types;
  std::vector<std::unique_ptr<Worker>> workers;

  std::mutex graph_mutex;
  std::unordered_map<std::uint64_t, std::unique_ptr<Task>> tasks;
  std::uint64_t next_task = 1;
  std::size_t unresolved = 0;
  std::unordered_map<std::uint64_t, ChunkId> finished_roots;

  std::atomic<std::size_t> queued{0};
  std::mutex idle_mutex;
  std::condition_variable idle_cv;
  std::size_t idle = 0;
  std::atomic<bool> failed{false};
  std::exception_ptr error;

  bool recording() const { return config.record_events; }

  void record(EventKind kind, WorkerId w, std::uint64_t task, int depth, std::uint64_t chunk, std::uint64_t bytes) {
    if (recording()) log.record(Event{kind, w, task, depth, chunk, bytes});
  }

  Worker& worker(WorkerId w) {
    if (w < 0 || static_cast<std::size_t>(w) >= workers.size()) {
      throw ContractViolation("worker " + std::to_string(w) + " does not exist");
    }
    return *workers[static_cast<std::size_t>(w)];
  }

  void push(WorkerId w, std::span<Task* const> ready) {
    if (ready.empty()) return;
    Worker& wk = worker(w);
    for (Task* t : ready) {
      t->placement.clear();
      for (ChunkId c : t->inputs) {
        if (c.is_nil()) continue;
        const ChunkRecord rec = store.lookup(c);
        t->placement.emplace_back(rec.owner, rec.weight);
      }
    }
    {
      std::lock_guard lock(wk.queue_mutex);
      for (Task* t : ready) wk.queue.push_back(t);
    }
    queued += ready.size();
    if (config.mode == ExecutionMode::shared_memory) idle_cv.notify_all();
  }

  Task* pop_own(WorkerId w) {
    Worker& wk = worker(w);
    std::lock_guard lock(wk.queue_mutex);
    if (wk.queue.empty()) return nullptr;
    Task* t = wk.queue.back();
    wk.queue.pop_back();
    --queued;
    return t;
  }

  // Input weight owned by w minus input weight it would have to fetch.
  static long long locality(const Task& t, WorkerId w) {
    long long score = 0;
    for (const auto& [owner, weight] : t.placement) {
      score += owner == w ? static_cast<long long>(weight) : -static_cast<long long>(weight);
    }
    return score;
  }

  struct Pick {
    std::deque<Task*>::iterator it;
    int depth = 0;
    long long local = 0;
  };

  // Shallowest task on the deque; among equals, the best locality for the
  // thief. Queue mutex held, queue non-empty.
  static Pick pick(Worker& victim, WorkerId thief) {
    Pick best{victim.queue.begin(), (*victim.queue.begin())->depth, 0};
    for (auto it = victim.queue.begin(); it != victim.queue.end(); ++it) best.depth = std::min(best.depth, (*it)->depth);
    bool found = false;
    for (auto it = victim.queue.begin(); it != victim.queue.end(); ++it) {
      if ((*it)->depth != best.depth) continue;
      const long long local = locality(**it, thief);
      if (!found || local > best.local) {
        best.it = it;
        best.local = local;
        found = true;
      }
    }
    return best;
  }

  // Breadth-first stealing over all victims: the globally shallowest queued
  // task is taken, preferring locality, then the first victim in a seeded
  // random order.
  Task* steal(WorkerId thief) {
    if (workers.size() < 2) return nullptr;
    Worker& me = worker(thief);
    std::vector<WorkerId> victims;
    victims.reserve(workers.size() - 1);
    for (std::size_t v = 0; v < workers.size(); ++v) {
      if (static_cast<WorkerId>(v) != thief) victims.push_back(static_cast<WorkerId>(v));
    }
    std::shuffle(victims.begin(), victims.end(), me.rng);
    for (std::size_t attempt = 0; attempt < victims.size(); ++attempt) {
      WorkerId chosen = -1;
      int depth = 0;
      long long local = 0;
      for (WorkerId v : victims) {
        Worker& victim = worker(v);
        std::lock_guard lock(victim.queue_mutex);
        if (victim.queue.empty()) continue;
        const Pick p = pick(victim, thief);
        if (chosen < 0 || p.depth < depth || (p.depth == depth && p.local > local)) {
          chosen = v;
          depth = p.depth;
          local = p.local;
        }
      }
      if (chosen < 0) return nullptr;
      Worker& victim = worker(chosen);
      std::lock_guard lock(victim.queue_mutex);
      if (victim.queue.empty()) continue;  // drained since the scan
      const Pick p = pick(victim, thief);
      Task* t = *p.it;
      victim.queue.erase(p.it);
      --queued;
      me.stats.steals++;
      record(EventKind::steal, thief, t->id, t->depth, static_cast<std::uint64_t>(chosen),
             static_cast<std::uint64_t>(t->depth));
      return t;
    }
    return nullptr;
  }

  const TaskType& lookup_type(std::string_view name) const {
    auto it = types.find(name);
    if (it == types.end()) throw ConfigError("unknown task type '" + std::string(name) + "'");
    return it->second;
  }

  // Creates a task record; returns it when it is immediately runnable.
  Task* create_task(const TaskType& type, std::vector<ChunkRef> inputs, std::any params, int depth,
                    std::uint64_t parent, WorkerId home, TaskHandle& handle) {
    for (const ChunkRef& in : inputs) {
      if (in.is_ready() && !in.chunk().is_nil() && !store.contains(in.chunk())) {
        throw InvalidHandle("task input chunk " + std::to_string(in.chunk().raw()) + " is not registered");
      }
    }
    std::lock_guard lock(graph_mutex);
    auto task = std::make_unique<Task>();
    Task* t = task.get();
    t->id = next_task++;
    t->type = &type;
    t->params = std::move(params);
    t->depth = depth;
    t->parent = parent;
    t->home = home;
    t->inputs.resize(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const ChunkRef& in = inputs[i];
      if (in.is_ready()) {
        t->inputs[i] = in.chunk();
        continue;
      }
      auto dep = tasks.find(in.task().id);
      if (dep == tasks.end()) {
        auto fin = finished_roots.find(in.task().id);
        if (fin == finished_roots.end()) {
          throw InvalidHandle("task input refers to unknown task " + std::to_string(in.task().id));
        }
        t->inputs[i] = fin->second;
      } else if (dep->second->done) {
        t->inputs[i] = dep->second->result;
      } else {
        dep->second->waiters.emplace_back(t, static_cast<int>(i));
        ++t->pending;
      }
    }
    ++unresolved;
    tasks.emplace(t->id, std::move(task));
    handle = TaskHandle{t->id};
    return t->pending == 0 ? t : nullptr;
  }

  // graph_mutex held.
  void resolve(Task* t, ChunkId result, std::vector<Task*>& ready) {
    std::vector<std::pair<Task*, ChunkId>> work{{t, result}};
    while (!work.empty()) {
      auto [task, value] = work.back();
      work.pop_back();
      task->done = true;
      task->result = value;
      --unresolved;
      if (task->depth == 0) finished_roots[task->id] = value;
      for (auto [waiter, slot] : task->waiters) {
        if (slot < 0) {
          work.emplace_back(waiter, value);
        } else {
          waiter->inputs[static_cast<std::size_t>(slot)] = value;
          if (--waiter->pending == 0) ready.push_back(waiter);
        }
      }
      task->waiters.clear();
    }
  }

  void finish(Task* t, const ChunkRef& out) {
    std::vector<Task*> ready;
    {
      std::lock_guard lock(graph_mutex);
      if (out.is_ready()) {
        resolve(t, out.chunk(), ready);
      } else {
        auto dep = tasks.find(out.task().id);
        if (dep == tasks.end()) {
          auto fin = finished_roots.find(out.task().id);
          if (fin == finished_roots.end()) {
            throw InvalidHandle("task output refers to unknown task " + std::to_string(out.task().id));
          }
          resolve(t, fin->second, ready);
        } else if (dep->second->done) {
          resolve(t, dep->second->result, ready);
        } else {
          dep->second->waiters.emplace_back(t, -1);
        }
      }
    }
    for (Task* r : ready) push(r->home, std::span<Task* const>(&r, 1));
  }

  std::string deadlock_message() {
    std::lock_guard lock(graph_mutex);
    const Task* blocked = nullptr;
    for (const auto& [id, t] : tasks) {
      if (!t->done && (blocked == nullptr || id < blocked->id)) blocked = t.get();
    }
    std::ostringstream os;
    os << "deadlock: " << unresolved << " task(s) can never complete";
    if (blocked != nullptr) {
      os << "; task " << blocked->id << " ('" << blocked->type->name << "', depth " << blocked->depth << ")";
      if (!blocked->executed) {
        os << " waits on " << blocked->pending << " unavailable input(s)";
      } else {
        os << " waits on the output of a task that never completes";
      }
    }
    return os.str();
  }

  void fail(std::exception_ptr e) {
    {
      std::lock_guard lock(idle_mutex);
      if (!error) error = e;
    }
    failed = true;
    idle_cv.notify_all();
  }

  void clear_run_state() {
    std::lock_guard lock(graph_mutex);
    for (auto& w : workers) {
      std::lock_guard qlock(w->queue_mutex);
      w->queue.clear();
    }
    tasks.clear();
    unresolved = 0;
    queued = 0;
    idle = 0;
  }
};

Runtime::Runtime(RuntimeConfig config) : impl_(std::make_unique<Impl>(config)) {}

Runtime::~Runtime() = default;

const RuntimeConfig& Runtime::config() const { return impl_->config; }

void Runtime::add_task_type(TaskType type) {
  if (type.name.empty() || !type.execute) throw ConfigError("task type needs a name and an execute body");
  if (!type.fallback) type.fallback = type.execute;
  std::string name = type.name;
  impl_->types.insert_or_assign(std::move(name), std::move(type));
}

bool Runtime::has_task_type(std::string_view name) const { return impl_->types.contains(name); }

ChunkId Runtime::register_chunk(Bytes payload, WorkerId worker) {
  if (payload.empty()) throw ContractViolation("cannot register an empty chunk");
  return register_object(std::make_shared<RawPayload>(std::move(payload)), worker);
}

ChunkId Runtime::register_object(std::shared_ptr<const ChunkPayload> payload, WorkerId worker, double summary,
                                 std::size_t weight) {
  impl_->worker(worker);
  const std::size_t size = payload ? payload->size_bytes() : 0;
  ChunkId id = impl_->store.insert(std::move(payload), worker, summary, weight);
  impl_->record(EventKind::register_chunk, worker, 0, -1, id.raw(), size);
  return id;
}

std::shared_ptr<const ChunkPayload> Runtime::fetch_payload(ChunkId id, WorkerId reader) {
  ChunkRecord rec = impl_->store.lookup(id);
  if (reader == kUntracked) return rec.payload;
  Worker& wk = impl_->worker(reader);
  std::lock_guard lock(wk.cache_mutex);
  if (rec.owner == reader || wk.cache.touch(id)) {
    wk.stats.cache_hits++;
    impl_->record(EventKind::fetch_hit, reader, 0, -1, id.raw(), 0);
    return rec.payload;
  }
  if (rec.size_bytes > impl_->config.cache_capacity_bytes) {
    throw ConfigError("chunk of " + std::to_string(rec.size_bytes) + " bytes exceeds the worker cache capacity of " +
                      std::to_string(impl_->config.cache_capacity_bytes) + " bytes");
  }
  wk.stats.cache_misses++;
  wk.stats.bytes_received += rec.size_bytes;
  wk.cache.insert(id, rec.size_bytes);
  impl_->record(EventKind::fetch_miss, reader, 0, -1, id.raw(), rec.size_bytes);
  return rec.payload;
}

Bytes Runtime::get_chunk(ChunkId id, WorkerId reader) { return fetch_payload(id, reader)->to_bytes(); }

double Runtime::summary(ChunkId id) const { return impl_->store.lookup(id).summary; }

std::size_t Runtime::weight(ChunkId id) const { return impl_->store.lookup(id).weight; }

WorkerId Runtime::owner(ChunkId id) const { return impl_->store.lookup(id).owner; }

void Runtime::release(ChunkId id) {
  impl_->store.erase(id);
  for (auto& w : impl_->workers) {
    std::lock_guard lock(w->cache_mutex);
    w->cache.erase(id);
  }
  impl_->record(EventKind::release_chunk, kUntracked, 0, -1, id.raw(), 0);
}

TaskHandle Runtime::register_task(TaskSpec spec, WorkerId worker) {
  impl_->worker(worker);
  const TaskType& type = impl_->lookup_type(spec.task_type);
  TaskHandle handle;
  Task* ready = impl_->create_task(type, std::move(spec.inputs), std::move(spec.params), 0, 0, worker, handle);
  impl_->record(EventKind::register_task, worker, handle.id, 0, 0, 0);
  if (ready != nullptr) impl_->push(worker, std::span<Task* const>(&ready, 1));
  return handle;
}

TaskHandle TaskContext::register_task(std::string_view type, std::vector<ChunkRef> inputs, std::any params) {
  Runtime::Impl& impl = *runtime_.impl_;
  const TaskType& tt = impl.lookup_type(type);
  TaskHandle handle;
  Runtime::Task* ready =
      impl.create_task(tt, std::move(inputs), std::move(params), task_.depth + 1, task_.id, worker_, handle);
  impl.record(EventKind::register_task, worker_, handle.id, task_.depth + 1, 0, 0);
  if (ready != nullptr) impl.push(worker_, std::span<Runtime::Task* const>(&ready, 1));
  return handle;
}

ChunkId TaskContext::register_chunk(std::shared_ptr<const ChunkPayload> payload, double summary, std::size_t weight) {
  return runtime_.register_object(std::move(payload), worker_, summary, weight);
}

TaskHandle TaskContext::handle() const { return TaskHandle{task_.id}; }
int TaskContext::depth() const { return task_.depth; }
std::span<const ChunkId> TaskContext::inputs() const { return task_.inputs; }
const std::any& TaskContext::params_ref() const { return task_.params; }

std::vector<WorkerStats> Runtime::run_to_completion() {
  Impl& impl = *impl_;
  {
    std::lock_guard lock(impl.graph_mutex);
    if (impl.unresolved == 0) throw ContractViolation("run_to_completion called with no registered task");
  }
  reset_stats();
  impl.failed = false;
  impl.error = nullptr;

  auto execute = [&](WorkerId w, Task* t) {
    t->executed = true;
    impl.worker(w).stats.tasks_executed++;
    impl.record(EventKind::execute, w, t->id, t->depth, 0, 0);
    const bool any_nil = std::any_of(t->inputs.begin(), t->inputs.end(), [](ChunkId c) { return c.is_nil(); });
    TaskContext ctx(*this, *t, w);
    ChunkRef out = any_nil ? t->type->fallback(ctx) : t->type->execute(ctx);
    impl.finish(t, out);
  };

  auto pending_tasks = [&] {
    std::lock_guard lock(impl.graph_mutex);
    return impl.unresolved;
  };

  const auto n = static_cast<WorkerId>(impl.workers.size());
  try {
    if (impl.config.mode == ExecutionMode::simulate) {
      while (pending_tasks() > 0) {
        bool progress = false;
        for (WorkerId w = 0; w < n; ++w) {
          Task* t = impl.pop_own(w);
          if (t == nullptr) t = impl.steal(w);
          if (t == nullptr) continue;
          execute(w, t);
          progress = true;
        }
        if (!progress) throw DeadlockError(impl.deadlock_message());
      }
    } else {
      auto loop = [&](WorkerId w) {
        try {
          while (!impl.failed) {
            Task* t = impl.pop_own(w);
            if (t == nullptr) t = impl.steal(w);
            if (t != nullptr) {
              execute(w, t);
              continue;
            }
            std::unique_lock lock(impl.idle_mutex);
            if (impl.failed || pending_tasks() == 0) break;
            ++impl.idle;
            if (impl.idle == impl.workers.size() && impl.queued == 0 && pending_tasks() > 0) {
              --impl.idle;
              lock.unlock();
              throw DeadlockError(impl.deadlock_message());
            }
            impl.idle_cv.wait_for(lock, std::chrono::milliseconds(1));
            --impl.idle;
          }
        } catch (...) {
          impl.fail(std::current_exception());
        }
        impl.idle_cv.notify_all();
      };
      std::vector<std::jthread> threads;
      for (WorkerId w = 1; w < n; ++w) threads.emplace_back(loop, w);
      loop(0);
      threads.clear();
      if (impl.error) std::rethrow_exception(impl.error);
    }
  } catch (...) {
    impl.clear_run_state();
    throw;
  }
  impl.clear_run_state();
  return stats();
}

ChunkId Runtime::result(TaskHandle handle) const {
  std::lock_guard lock(impl_->graph_mutex);
  auto it = impl_->finished_roots.find(handle.id);
  if (it != impl_->finished_roots.end()) return it->second;
  throw InvalidHandle("task " + std::to_string(handle.id) + " has no available result");
}

std::vector<WorkerStats> Runtime::stats() const {
  std::vector<WorkerStats> out;
  for (const auto& w : impl_->workers) {
    std::lock_guard lock(w->cache_mutex);
    out.push_back(w->stats);
  }
  return out;
}

void Runtime::reset_stats() {
  for (auto& w : impl_->workers) {
    std::lock_guard lock(w->cache_mutex);
    const WorkerId id = w->stats.worker;
    w->stats = WorkerStats{};
    w->stats.worker = id;
  }
}

ChunkStore& Runtime::store() { return impl_->store; }
const ChunkStore& Runtime::store() const { return impl_->store; }
EventLog& Runtime::events() { return impl_->log; }

}  // namespace quadtask
