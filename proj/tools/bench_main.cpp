// bench: desk-scale weak-scaling harness and flop oracle.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "quadtask/bench/bench.hpp"
#include "quadtask/error.hpp"

using namespace quadtask;

namespace {

void print_records(const std::vector<BenchRecord>& records) {
  std::printf("%-14s %-8s %8s %7s %6s %11s %10s %12s %12s %10s\n", "case", "mode", "n", "workers", "rep", "seconds",
              "Gflop", "bytes/worker", "tasks/worker", "efficiency");
  for (const auto& r : records) {
    std::printf("%-14s %-8s %8lld %7zu %6d %11.4f %10.3f %12.4g %12.1f %10.4f\n", r.case_id.c_str(), r.mode.c_str(),
                static_cast<long long>(r.n), r.n_workers, r.repeat, r.wall_seconds, static_cast<double>(r.flops) / 1e9,
                r.bytes_received.mean, r.tasks.mean, r.efficiency);
  }
}

void emit(const std::filesystem::path& out, const std::vector<BenchRecord>& records) {
  std::filesystem::create_directories(out);
  write_csv_file(out / "results.csv", records);
  const auto plots = write_plots(out, records);
  std::printf("wrote %s, %s, %s, %s\n", (out / "results.csv").c_str(), plots.wall_time.c_str(),
              plots.efficiency.c_str(), plots.bytes_received.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadtree sparse matrix multiply benchmark"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Benchmark one case and worker count");
  std::string case_name, mode_name = "simulate", leaf_kind = "block-sparse", out_dir = "bench-out";
  Index n = 0, leaf_dim = 256, block_size = 64;
  std::optional<Index> b, s, blocks;
  std::size_t workers = 1, cache_bytes = std::size_t{64} << 20, memory_bytes = 0;
  int repeats = 1;
  std::uint64_t seed = 0;
  double peak_gflops = 10.0;
  run->add_option("--case", case_name, "banded | growing-block | random-blocks")->required();
  run->add_option("--n", n, "Matrix dimension")->required()->check(CLI::PositiveNumber);
  run->add_option("--workers", workers, "Worker count")->check(CLI::PositiveNumber);
  run->add_option("--mode", mode_name, "shared | simulate");
  run->add_option("--leaf-dim", leaf_dim, "Leaf matrix dimension")->check(CLI::PositiveNumber);
  run->add_option("--block-size", block_size, "Block size inside leaves")->check(CLI::PositiveNumber);
  run->add_option("--cache-bytes", cache_bytes, "Per-worker chunk cache capacity")->check(CLI::PositiveNumber);
  run->add_option("--repeats", repeats, "Repetitions")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Seed for block placement and work stealing");
  run->add_option("--out", out_dir, "Output directory for CSV and plots");
  run->add_option("--b", b, "Half bandwidth (default n/32)");
  run->add_option("--s", s, "Diagonal block size (default: solved for doubled flops)");
  run->add_option("--blocks", blocks, "Number of random blocks (default max(1, n/100000))");
  run->add_option("--leaf-kind", leaf_kind, "dense | block-sparse | hierarchical");
  run->add_option("--peak-gflops", peak_gflops, "Peak Gflop/s of one thread, for efficiency")->check(CLI::PositiveNumber);
  run->add_option("--memory-bytes", memory_bytes, "Chunk store limit (default 60% of RAM)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a weak-scaling sweep from a key=value file");
  std::string config_path;
  std::optional<std::string> sweep_out;
  sweep->add_option("--config", config_path, "Sweep configuration file")->required();
  sweep->add_option("--out", sweep_out, "Override the output directory");

  // flops
  auto* flops = app.add_subcommand("flops", "Print the exact flop count of A*A for a case");
  std::string flops_case;
  Index fn = 0, fb = 0;
  std::optional<Index> fs, fblocks;
  std::optional<std::uint64_t> fseed;
  double ratio = 2.0;
  flops->add_option("--case", flops_case, "banded | growing-block | random-blocks")->required();
  flops->add_option("--n", fn, "Matrix dimension")->required()->check(CLI::PositiveNumber);
  flops->add_option("--b", fb, "Half bandwidth")->required()->check(CLI::NonNegativeNumber);
  flops->add_option("--s", fs, "Block size (default: solved)");
  flops->add_option("--blocks", fblocks, "Number of random blocks (default max(1, n/100000))");
  flops->add_option("--seed", fseed, "Random block placement seed (default: reference placement)");
  flops->add_option("--ratio", ratio, "Flop ratio to banded when solving the block size")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      BenchConfig c;
      c.experiment.family = parse_family(case_name);
      c.experiment.n = n;
      c.experiment.half_bandwidth = b.value_or(n / 32);
      c.experiment.block_size = s.value_or(0);
      c.experiment.n_blocks = blocks.value_or(0);
      c.experiment.seed = seed;
      c.n_workers = workers;
      c.mode = parse_mode(mode_name);
      c.leaf_dim = leaf_dim;
      c.block_size = block_size;
      c.leaf_kind = parse_leaf_kind(leaf_kind);
      c.cache_bytes = cache_bytes;
      c.repeats = repeats;
      c.seed = seed;
      c.peak_flops = peak_gflops * 1e9;
      c.memory_limit_bytes = memory_bytes;
      const auto records = run_bench(c);
      print_records(records);
      emit(out_dir, records);
    } else if (*sweep) {
      const SweepConfig sc = load_sweep_config(config_path);
      std::vector<BenchRecord> all;
      for (const auto& c : expand_sweep(sc)) {
        auto records = run_bench(c);
        print_records(records);
        all.insert(all.end(), records.begin(), records.end());
      }
      emit(sweep_out.value_or(sc.out), all);
    } else if (*flops) {
      const Family family = parse_family(flops_case);
      Pattern pattern(fn, fb);
      if (family != Family::banded) {
        const Index nb = family == Family::growing_block ? 1 : fblocks.value_or(default_block_count(fn));
        const Index size = fs ? *fs : solve_block_size(family, fn, fb, ratio, nb);
        std::vector<Index> starts;
        if (size > 0) {
          if (family == Family::growing_block) starts = {0};
          else starts = fseed ? place_blocks(fn, size, nb, *fseed) : reference_block_starts(fn, size, nb);
        }
        pattern = Pattern(fn, fb, size, std::move(starts));
        std::printf("block_size=%lld n_blocks=%lld\n", static_cast<long long>(size), static_cast<long long>(nb));
      }
      const std::uint64_t f = flop_count(pattern);
      std::printf("case=%s n=%lld b=%lld\n", to_string(family).c_str(), static_cast<long long>(fn),
                  static_cast<long long>(fb));
      std::printf("flops=%llu\n", static_cast<unsigned long long>(f));
      std::printf("tflop=%.4g\n", static_cast<double>(f) / 1e12);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bench: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
