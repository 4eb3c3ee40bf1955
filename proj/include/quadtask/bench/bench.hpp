#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "quadtask/gen/experiment.hpp"
#include "quadtask/runtime/runtime.hpp"

namespace quadtask {

struct BenchConfig {
  // A block_size of 0 for growing_block / random_blocks is solved for a
  // doubled flop count.
  ExperimentCase experiment;
  std::size_t n_workers = 1;
  Index leaf_dim = 256;
  Index block_size = 64;
  LeafKind leaf_kind = LeafKind::block_sparse;
  std::size_t cache_bytes = std::size_t{64} << 20;
  ExecutionMode mode = ExecutionMode::simulate;
  int repeats = 1;
  std::uint64_t seed = 0;
  // Peak of one executing thread in flop/s; the efficiency denominator is
  // this times the number of threads (workers in shared mode, 1 simulated).
  double peak_flops = 1e10;
  // Chunk store limit; 0 picks 60% of physical memory.
  std::size_t memory_limit_bytes = 0;

  void validate() const;
};

struct Spread {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;

  friend bool operator==(const Spread&, const Spread&) = default;
};

Spread spread_of(const std::vector<double>& values);

struct BenchRecord {
  std::string case_id;
  std::string mode;
  Index n = 0;
  Index half_bandwidth = 0;
  Index block_size = 0;
  Index n_blocks = 0;
  std::size_t n_workers = 0;
  int repeat = 0;
  double wall_seconds = 0.0;
  std::uint64_t flops = 0;  // from the exact pattern count
  double efficiency = 0.0;
  Spread bytes_received;  // over workers
  Spread tasks;           // over workers
  std::uint64_t steals = 0;

  friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

std::string to_string(ExecutionMode m);
// "shared" / "shared-memory" or "simulate".
ExecutionMode parse_mode(std::string_view s);

// Fills in solved block sizes and default block counts.
ExperimentCase resolve_case(const ExperimentCase& c);

// generate -> multiply(A, A) -> stats, `repeats` times. The matrix stays the
// same across repeats; the runtime seed changes.
std::vector<BenchRecord> run_bench(const BenchConfig& config);

// CSV with a versioned first line; numbers printed with %.17g so a reload is
// exact.
inline constexpr const char* kCsvVersionLine = "# quadtask-bench-csv v1";
std::string csv_header();
void write_csv(std::ostream& out, const std::vector<BenchRecord>& records);
std::vector<BenchRecord> read_csv(std::istream& in);
void write_csv_file(const std::filesystem::path& path, const std::vector<BenchRecord>& records);

// Wall time, efficiency and mean bytes received against worker count: one
// series per case (and mode), solid mean line, dashed min and max lines.
struct PlotFiles {
  std::filesystem::path wall_time;
  std::filesystem::path efficiency;
  std::filesystem::path bytes_received;
};

PlotFiles write_plots(const std::filesystem::path& dir, const std::vector<BenchRecord>& records);

struct SweepPoint {
  double x = 0.0;
  Spread y;
};

struct PlotSeries {
  std::string name;
  std::vector<SweepPoint> points;
};

std::string render_svg(const std::string& title, const std::string& y_label, const std::vector<PlotSeries>& series);

// Plain key=value sweep description; '#' starts a comment.
struct SweepConfig {
  std::vector<Family> cases{Family::banded};
  std::vector<std::size_t> workers{1, 2, 4, 8};
  Index n_per_worker = 4096;
  Index half_bandwidth = 0;  // 0: n_per_worker / 32
  Index rows_per_block = 8192;  // random_blocks: n_blocks = max(1, n / rows_per_block)
  ExecutionMode mode = ExecutionMode::simulate;
  Index leaf_dim = 256;
  Index block_size = 64;
  LeafKind leaf_kind = LeafKind::block_sparse;
  std::size_t cache_bytes = std::size_t{64} << 20;
  int repeats = 1;
  std::uint64_t seed = 0;
  double peak_gflops = 10.0;
  std::string out = "bench-out";
};

SweepConfig parse_sweep_config(std::istream& in);
SweepConfig load_sweep_config(const std::filesystem::path& path);
std::vector<BenchConfig> expand_sweep(const SweepConfig& sweep);

}  // namespace quadtask
