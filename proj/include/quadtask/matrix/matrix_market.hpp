#pragma once

#include <iosfwd>
#include <vector>

#include "quadtask/matrix/quadtree.hpp"

namespace quadtask {

struct MarketData {
  Index n = 0;
  bool symmetric = false;
  // Zero-based. For symmetric files the entries are mapped to the upper
  // triangle.
  std::vector<Triplet> entries;
};

// Coordinate real format, 1-based, general or symmetric (symmetric files
// list the lower triangle).
MarketData read_matrix_market(std::istream& in);
void write_matrix_market(std::ostream& out, Runtime& rt, const Matrix& m);

}  // namespace quadtask
