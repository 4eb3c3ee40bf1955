#include "quadtask/bench/bench.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <new>
#include <numeric>

#include "quadtask/error.hpp"
#include "quadtask/ops/ops.hpp"

namespace quadtask {

void BenchConfig::validate() const {
  if (experiment.n <= 0) throw ConfigError("matrix dimension must be positive");
  if (experiment.half_bandwidth < 0) throw ConfigError("half bandwidth must be non-negative");
  if (n_workers == 0) throw ConfigError("need at least one worker");
  if (leaf_dim <= 0 || block_size <= 0) throw ConfigError("leaf and block sizes must be positive");
  if (cache_bytes == 0) throw ConfigError("cache size must be positive");
  if (repeats < 1) throw ConfigError("repeats must be at least 1");
  if (!(peak_flops > 0.0)) throw ConfigError("peak flop rate must be positive");
  try {
    MatrixParams::make(experiment.n, leaf_dim, leaf_kind, block_size);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

Spread spread_of(const std::vector<double>& v) {
  if (v.empty()) return {};
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {*lo, std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()), *hi};
}

std::string to_string(ExecutionMode m) { return m == ExecutionMode::shared_memory ? "shared" : "simulate"; }

ExecutionMode parse_mode(std::string_view s) {
  if (s == "shared" || s == "shared-memory" || s == "shared_memory") return ExecutionMode::shared_memory;
  if (s == "simulate") return ExecutionMode::simulate;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected shared or simulate)");
}

ExperimentCase resolve_case(const ExperimentCase& c) {
  ExperimentCase r = c;
  if (r.family == Family::banded) {
    r.block_size = 0;
    r.n_blocks = 0;
    return r;
  }
  if (r.family == Family::growing_block) r.n_blocks = 1;
  if (r.family == Family::random_blocks && r.n_blocks <= 0) r.n_blocks = default_block_count(r.n);
  if (r.block_size <= 0) r.block_size = solve_block_size(r.family, r.n, r.half_bandwidth, 2.0, r.n_blocks);
  return r;
}

namespace {

std::size_t default_memory_limit() {
  const long pages = sysconf(_SC_PHYS_PAGES), page = sysconf(_SC_PAGESIZE);
  if (pages <= 0 || page <= 0) return ChunkStore::kUnlimited;
  return static_cast<std::size_t>(0.6 * static_cast<double>(pages) * static_cast<double>(page));
}

[[noreturn]] void sizing_error(const BenchConfig& c, const std::string& why) {
  throw ConfigError("dimension " + std::to_string(c.experiment.n) + " does not fit (" + why + "); try --n " +
                    std::to_string(std::max<Index>(1, c.experiment.n / 2)) + " or fewer");
}

}  // namespace

std::vector<BenchRecord> run_bench(const BenchConfig& config) {
  config.validate();
  const ExperimentCase ec = resolve_case(config.experiment);
  const std::uint64_t flops = flop_count_exact(ec);
  const auto params = MatrixParams::make(ec.n, config.leaf_dim, config.leaf_kind, config.block_size);
  const double threads = config.mode == ExecutionMode::shared_memory ? static_cast<double>(config.n_workers) : 1.0;

  std::vector<BenchRecord> out;
  for (int r = 0; r < config.repeats; ++r) {
    RuntimeConfig rc;
    rc.n_workers = config.n_workers;
    rc.cache_capacity_bytes = config.cache_bytes;
    rc.seed = config.seed + static_cast<std::uint64_t>(r);
    rc.mode = config.mode;
    rc.store_capacity_bytes = config.memory_limit_bytes ? config.memory_limit_bytes : default_memory_limit();
    BenchRecord rec;
    try {
      Runtime rt(rc);
      const Matrix a = generate(rt, ec, params, OwnerPolicy{config.n_workers});
      const auto start = std::chrono::steady_clock::now();
      multiply(rt, a, a);
      rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::vector<double> bytes, tasks;
      for (const auto& s : rt.stats()) {
        bytes.push_back(static_cast<double>(s.bytes_received));
        tasks.push_back(static_cast<double>(s.tasks_executed));
        rec.steals += s.steals;
      }
      rec.bytes_received = spread_of(bytes);
      rec.tasks = spread_of(tasks);
    } catch (const OutOfMemory& e) {
      sizing_error(config, e.what());
    } catch (const std::bad_alloc&) {
      sizing_error(config, "allocation failed");
    }
    rec.case_id = to_string(ec.family);
    rec.mode = to_string(config.mode);
    rec.n = ec.n;
    rec.half_bandwidth = ec.half_bandwidth;
    rec.block_size = ec.block_size;
    rec.n_blocks = ec.n_blocks;
    rec.n_workers = config.n_workers;
    rec.repeat = r;
    rec.flops = flops;
    const double rate = static_cast<double>(flops) / std::max(rec.wall_seconds, 1e-12);
    rec.efficiency = rate / (config.peak_flops * threads);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace quadtask
