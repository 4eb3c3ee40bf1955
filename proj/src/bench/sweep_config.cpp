#include <charconv>
#include <fstream>
#include <sstream>

#include "quadtask/bench/bench.hpp"
#include "quadtask/error.hpp"

namespace quadtask {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T number(const std::string& key, const std::string& v) {
  T out{};
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) throw ConfigError("bad value '" + v + "' for key '" + key + "'");
  return out;
}

template <class T>
T positive(const std::string& key, const std::string& v) {
  const T x = number<T>(key, v);
  if (!(x > T{0})) throw ConfigError("key '" + key + "' must be positive");
  return x;
}

}  // namespace

SweepConfig parse_sweep_config(std::istream& in) {
  SweepConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (value.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty value for '" + key + "'");
    try {
      if (key == "cases") {
        c.cases.clear();
        for (const auto& s : split_list(value)) c.cases.push_back(parse_family(s));
      } else if (key == "workers") {
        c.workers.clear();
        for (const auto& s : split_list(value)) c.workers.push_back(positive<std::size_t>(key, s));
      } else if (key == "n_per_worker") {
        c.n_per_worker = positive<Index>(key, value);
      } else if (key == "b") {
        c.half_bandwidth = number<Index>(key, value);
      } else if (key == "rows_per_block") {
        c.rows_per_block = positive<Index>(key, value);
      } else if (key == "mode") {
        c.mode = parse_mode(value);
      } else if (key == "leaf_dim") {
        c.leaf_dim = positive<Index>(key, value);
      } else if (key == "block_size") {
        c.block_size = positive<Index>(key, value);
      } else if (key == "leaf_kind") {
        c.leaf_kind = parse_leaf_kind(value);
      } else if (key == "cache_bytes") {
        c.cache_bytes = positive<std::size_t>(key, value);
      } else if (key == "repeats") {
        c.repeats = positive<int>(key, value);
      } else if (key == "seed") {
        c.seed = number<std::uint64_t>(key, value);
      } else if (key == "peak_gflops") {
        c.peak_gflops = positive<double>(key, value);
      } else if (key == "out") {
        c.out = value;
      } else {
        throw ConfigError("unknown key '" + key + "'");
      }
    } catch (const Error& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::logic_error&) {
      throw ConfigError("line " + std::to_string(lineno) + ": bad value '" + value + "'");
    }
  }
  if (c.cases.empty() || c.workers.empty()) throw ConfigError("sweep needs at least one case and one worker count");
  return c;
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_sweep_config(in);
}

std::vector<BenchConfig> expand_sweep(const SweepConfig& s) {
  std::vector<BenchConfig> out;
  const Index b = s.half_bandwidth > 0 ? s.half_bandwidth : s.n_per_worker / 32;
  for (Family f : s.cases) {
    for (std::size_t w : s.workers) {
      BenchConfig c;
      c.experiment.family = f;
      c.experiment.n = s.n_per_worker * static_cast<Index>(w);
      c.experiment.half_bandwidth = b;
      c.experiment.seed = s.seed;
      if (f == Family::random_blocks) c.experiment.n_blocks = std::max<Index>(1, c.experiment.n / s.rows_per_block);
      c.n_workers = w;
      c.leaf_dim = s.leaf_dim;
      c.block_size = s.block_size;
      c.leaf_kind = s.leaf_kind;
      c.cache_bytes = s.cache_bytes;
      c.mode = s.mode;
      c.repeats = s.repeats;
      c.seed = s.seed;
      c.peak_flops = s.peak_gflops * 1e9;
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace quadtask
