#include <cstdio>
#include <fstream>
#include <sstream>

#include "quadtask/bench/bench.hpp"
#include "quadtask/error.hpp"

namespace quadtask {
namespace {

constexpr const char* kColumns[] = {"case",       "mode",       "n",         "half_bandwidth", "block_size",
                                    "n_blocks",   "n_workers",  "repeat",    "wall_seconds",   "flops",
                                    "efficiency", "bytes_min",  "bytes_mean", "bytes_max",     "tasks_min",
                                    "tasks_mean", "tasks_max",  "steals"};
constexpr std::size_t kColumnCount = std::size(kColumns);

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw FormatError("bad number '" + s + "'");
  return v;
}

template <class T>
T parse_int(const std::string& s) {
  std::size_t used = 0;
  const auto v = std::stoll(s, &used);
  if (used != s.size() || v < 0) throw FormatError("bad integer '" + s + "'");
  return static_cast<T>(v);
}

}  // namespace

std::string csv_header() {
  std::string h;
  for (std::size_t i = 0; i < kColumnCount; ++i) h += (i ? "," : "") + std::string(kColumns[i]);
  return h;
}

void write_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
  out << kCsvVersionLine << '\n' << csv_header() << '\n';
  for (const auto& r : records) {
    out << r.case_id << ',' << r.mode << ',' << r.n << ',' << r.half_bandwidth << ',' << r.block_size << ','
        << r.n_blocks << ',' << r.n_workers << ',' << r.repeat << ',' << num(r.wall_seconds) << ',' << r.flops << ','
        << num(r.efficiency) << ',' << num(r.bytes_received.min) << ',' << num(r.bytes_received.mean) << ','
        << num(r.bytes_received.max) << ',' << num(r.tasks.min) << ',' << num(r.tasks.mean) << ','
        << num(r.tasks.max) << ',' << r.steals << '\n';
  }
}

std::vector<BenchRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvVersionLine) throw FormatError("missing CSV version line");
  if (!std::getline(in, line) || line != csv_header()) throw FormatError("unexpected CSV header");
  std::vector<BenchRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != kColumnCount) throw FormatError("CSV row has " + std::to_string(f.size()) + " fields");
    try {
      BenchRecord r;
      r.case_id = f[0];
      r.mode = f[1];
      r.n = parse_int<Index>(f[2]);
      r.half_bandwidth = parse_int<Index>(f[3]);
      r.block_size = parse_int<Index>(f[4]);
      r.n_blocks = parse_int<Index>(f[5]);
      r.n_workers = parse_int<std::size_t>(f[6]);
      r.repeat = parse_int<int>(f[7]);
      r.wall_seconds = parse_double(f[8]);
      r.flops = std::stoull(f[9]);
      r.efficiency = parse_double(f[10]);
      r.bytes_received = {parse_double(f[11]), parse_double(f[12]), parse_double(f[13])};
      r.tasks = {parse_double(f[14]), parse_double(f[15]), parse_double(f[16])};
      r.steals = std::stoull(f[17]);
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError("malformed CSV row: " + line);
    }
  }
  return out;
}

void write_csv_file(const std::filesystem::path& path, const std::vector<BenchRecord>& records) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_csv(out, records);
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace quadtask
