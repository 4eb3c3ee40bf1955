#include "quadtask/matrix/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "quadtask/error.hpp"

namespace quadtask {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

MarketData read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty matrix market stream");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (tag != "%%MatrixMarket" || lower(object) != "matrix" || lower(format) != "coordinate") {
    throw FormatError("expected a '%%MatrixMarket matrix coordinate' banner");
  }
  if (const auto f = lower(field); f != "real" && f != "integer") {
    throw FormatError("unsupported matrix market field '" + field + "'");
  }
  MarketData data;
  if (const auto s = lower(symmetry); s == "symmetric") {
    data.symmetric = true;
  } else if (s != "general") {
    throw FormatError("unsupported matrix market symmetry '" + symmetry + "'");
  }

  while (std::getline(in, line) && (line.empty() || line[0] == '%')) {
  }
  std::istringstream size_line(line);
  Index rows = 0, cols = 0;
  std::size_t count = 0;
  if (!(size_line >> rows >> cols >> count)) throw FormatError("malformed matrix market size line");
  if (rows != cols || rows <= 0) throw FormatError("only square matrices are supported");
  data.n = rows;
  data.entries.reserve(count);

  for (std::size_t k = 0; k < count; ++k) {
    Index i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v)) throw FormatError("matrix market stream ended after " + std::to_string(k) + " entries");
    if (i < 1 || j < 1 || i > rows || j > cols) {
      throw IndexOutOfRange("matrix market entry (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range");
    }
    if (data.symmetric && i < j) throw FormatError("symmetric matrix market entries must lie in the lower triangle");
    if (data.symmetric) std::swap(i, j);
    data.entries.push_back({i - 1, j - 1, v});
  }
  return data;
}

void write_matrix_market(std::ostream& out, Runtime& rt, const Matrix& m) {
  const auto entries = collect_triplets(rt, m);
  out << "%%MatrixMarket matrix coordinate real " << (m.symmetric ? "symmetric" : "general") << '\n';
  out << m.params.n_logical << ' ' << m.params.n_logical << ' ' << entries.size() << '\n';
  char buf[64];
  // Symmetric files list the lower triangle; the tree stores the upper one.
  std::vector<Triplet> sorted = entries;
  if (m.symmetric) {
    for (auto& t : sorted) std::swap(t.row, t.col);
    std::sort(sorted.begin(), sorted.end(),
              [](const Triplet& a, const Triplet& b) { return a.col != b.col ? a.col < b.col : a.row < b.row; });
  }
  for (const auto& t : sorted) {
    std::snprintf(buf, sizeof buf, "%.17g", t.value);
    out << t.row + 1 << ' ' << t.col + 1 << ' ' << buf << '\n';
  }
  if (!out) throw Error("failed to write matrix market data");
}

}  // namespace quadtask
