#include "quadtask/leaf/leaf.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "quadtask/error.hpp"

namespace quadtask {

namespace {

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

// Applies f to two leaves of the same concrete kind.
template <class F>
Leaf visit_same(const Leaf& a, const Leaf& b, F&& f) {
  if (a.index() != b.index()) throw ConfigError("leaf operation on mixed leaf kinds");
  return std::visit(
      [&](const auto& x) -> Leaf {
        using T = std::decay_t<decltype(x)>;
        return Leaf(f(x, std::get<T>(b)));
      },
      a);
}

Index block_size_of(const Leaf& a) {
  return std::visit(overloaded{[](const DenseLeaf& d) { return d.dim(); },
                               [](const BlockSparseLeaf& s) { return s.block_size(); },
                               [](const HierarchicalLeaf& h) { return h.block_size(); }},
                    a);
}

}  // namespace

std::string_view to_string(LeafKind kind) {
  switch (kind) {
    case LeafKind::dense: return "dense";
    case LeafKind::block_sparse: return "block-sparse";
    case LeafKind::hierarchical: return "hierarchical";
  }
  return "unknown";
}

LeafKind parse_leaf_kind(std::string_view text) {
  if (text == "dense") return LeafKind::dense;
  if (text == "block-sparse" || text == "block_sparse") return LeafKind::block_sparse;
  if (text == "hierarchical") return LeafKind::hierarchical;
  throw ConfigError("unknown leaf kind '" + std::string(text) + "'");
}

LeafKind kind_of(const Leaf& a) { return static_cast<LeafKind>(a.index()); }

LeafShape shape_of(const Leaf& a) {
  const Index n = std::visit([](const auto& x) { return x.dim(); }, a);
  return LeafShape{kind_of(a), n, block_size_of(a)};
}

void validate(const LeafShape& shape) {
  if (shape.n <= 0) throw InvalidArgument("leaf dimension must be positive");
  if (shape.kind == LeafKind::dense) return;
  leaf_zero(shape);
}

Leaf leaf_zero(const LeafShape& shape) {
  switch (shape.kind) {
    case LeafKind::dense: return DenseLeaf(shape.n);
    case LeafKind::block_sparse: return BlockSparseLeaf(shape.n, shape.block_size);
    case LeafKind::hierarchical: return HierarchicalLeaf(shape.n, shape.block_size);
  }
  throw ConfigError("unknown leaf kind");
}

Leaf leaf_from_dense(const LeafShape& shape, const Eigen::MatrixXd& dense) {
  if (dense.rows() != shape.n || dense.cols() != shape.n) throw DimensionMismatch("dense input does not match leaf shape");
  switch (shape.kind) {
    case LeafKind::dense: return DenseLeaf(dense);
    case LeafKind::block_sparse: return detail::block_sparse_from_dense(dense, shape.block_size);
    case LeafKind::hierarchical: return detail::hierarchical_from_dense(dense, shape.block_size);
  }
  throw ConfigError("unknown leaf kind");
}

Eigen::MatrixXd leaf_to_dense(const Leaf& a) {
  return std::visit([](const auto& x) { return detail::to_dense(x); }, a);
}

Leaf leaf_from_triplets(const LeafShape& shape, std::span<const Triplet> entries) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(shape.n, shape.n);
  for (const Triplet& t : entries) {
    if (t.row < 0 || t.row >= shape.n || t.col < 0 || t.col >= shape.n) {
      throw IndexOutOfRange("entry (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                            ") outside leaf of dimension " + std::to_string(shape.n));
    }
    d(t.row, t.col) += t.value;
  }
  return leaf_from_dense(shape, d);
}

std::vector<double> leaf_get_elements(const Leaf& a, std::span<const Coord> indices) {
  const Index n = std::visit([](const auto& x) { return x.dim(); }, a);
  std::vector<double> out;
  out.reserve(indices.size());
  for (const Coord& c : indices) {
    if (c.row < 0 || c.row >= n || c.col < 0 || c.col >= n) {
      throw IndexOutOfRange("index (" + std::to_string(c.row) + ", " + std::to_string(c.col) + ") outside leaf");
    }
    out.push_back(std::visit([&](const auto& x) { return detail::element(x, c.row, c.col); }, a));
  }
  return out;
}

Leaf leaf_multiply(const Leaf& a, const Leaf& b, Transpose ta, Transpose tb) {
  return visit_same(a, b, [&](const auto& x, const auto& y) {
    if (x.dim() != y.dim()) throw DimensionMismatch("leaf multiply with unequal dimensions");
    return detail::multiply(x, y, ta, tb);
  });
}

Leaf leaf_add(const Leaf& a, const Leaf& b, double alpha, double beta) {
  return visit_same(a, b, [&](const auto& x, const auto& y) {
    if (x.dim() != y.dim()) throw DimensionMismatch("leaf add with unequal dimensions");
    return detail::add(x, y, alpha, beta);
  });
}

Leaf leaf_scale(const Leaf& a, double alpha) {
  return std::visit([&](const auto& x) { return Leaf(detail::scale(x, alpha)); }, a);
}

double leaf_norm_squared(const Leaf& a) {
  return std::visit([](const auto& x) { return detail::norm_squared(x); }, a);
}

double leaf_norm_frobenius(const Leaf& a) { return std::sqrt(leaf_norm_squared(a)); }

bool leaf_is_zero(const Leaf& a) {
  return std::visit([](const auto& x) { return detail::is_zero(x); }, a);
}

std::size_t leaf_nnz(const Leaf& a) {
  return std::visit([](const auto& x) { return detail::nnz(x); }, a);
}

std::vector<double> leaf_unit_norms(const Leaf& a) {
  return std::visit([](const auto& x) { return detail::unit_norms(x); }, a);
}

Leaf leaf_drop_units(const Leaf& a, double threshold) {
  return std::visit([&](const auto& x) { return Leaf(detail::drop_units(x, threshold)); }, a);
}

std::optional<double> truncation_threshold(std::vector<double> norms, double tau) {
  if (tau < 0.0 || std::isnan(tau)) throw InvalidArgument("truncation tolerance must be non-negative");
  std::sort(norms.begin(), norms.end());
  const double budget = tau * tau;
  double used = 0.0;
  std::optional<double> threshold;
  std::size_t i = 0;
  while (i < norms.size()) {
    const double v = norms[i];
    double group = 0.0;
    std::size_t j = i;
    for (; j < norms.size() && norms[j] == v; ++j) group += v * v;
    if (used + group > budget) break;
    used += group;
    threshold = v;
    i = j;
  }
  return threshold;
}

LeafTruncation leaf_truncate(const Leaf& a, double tau) {
  if (tau < 0.0 || std::isnan(tau)) throw InvalidArgument("truncation tolerance must be non-negative");
  const double total = leaf_norm_frobenius(a);
  if (tau >= total) return LeafTruncation{leaf_zero(shape_of(a)), total};
  std::vector<double> norms = leaf_unit_norms(a);
  const auto threshold = truncation_threshold(norms, tau);
  if (!threshold) return LeafTruncation{a, 0.0};
  double removed = 0.0;
  for (double v : norms) {
    if (v <= *threshold) removed += v * v;
  }
  return LeafTruncation{leaf_drop_units(a, *threshold), std::sqrt(removed)};
}

Leaf leaf_upper(const Leaf& a) {
  Eigen::MatrixXd d = leaf_to_dense(a);
  d.triangularView<Eigen::StrictlyLower>().setZero();
  return leaf_from_dense(shape_of(a), d);
}

Leaf leaf_symmetrize(const Leaf& upper) {
  const Eigen::MatrixXd u = leaf_to_dense(upper);
  Eigen::MatrixXd full = u.triangularView<Eigen::Upper>();
  full.triangularView<Eigen::StrictlyLower>() = u.transpose();
  return leaf_from_dense(shape_of(upper), full);
}

Leaf leaf_add_identity(const Leaf& a, double c, Index extent) {
  Eigen::MatrixXd d = leaf_to_dense(a);
  extent = std::clamp<Index>(extent, 0, d.rows());
  for (Index i = 0; i < extent; ++i) d(i, i) += c;
  return leaf_from_dense(shape_of(a), d);
}

Leaf leaf_inverse_cholesky(const Leaf& upper, Index extent) {
  const Eigen::MatrixXd a = leaf_to_dense(upper);
  const Index m = std::clamp<Index>(extent, 0, a.rows());
  // Upper Cholesky factor R with A = R^T R, column by column.
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m, m);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < j; ++i) {
      const double dot = r.col(i).head(i).dot(r.col(j).head(i));
      r(i, j) = (a(i, j) - dot) / r(i, i);
    }
    const double pivot = a(j, j) - r.col(j).head(j).squaredNorm();
    if (!(pivot > 0.0)) throw NotPositiveDefinite(j);
    r(j, j) = std::sqrt(pivot);
  }
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  if (m > 0) {
    z.topLeftCorner(m, m) = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(m, m));
    z.topLeftCorner(m, m).triangularView<Eigen::StrictlyLower>().setZero();
  }
  return leaf_from_dense(shape_of(upper), z);
}

std::size_t leaf_serialized_size(const Leaf& a) {
  return std::visit([](const auto& x) { return detail::serialized_size(x); }, a);
}

void write_leaf(ByteWriter& out, const Leaf& a) {
  std::visit([&](const auto& x) { detail::write(out, x); }, a);
}

Leaf read_leaf(ByteReader& in) {
  switch (static_cast<LeafKind>(in.u8())) {
    case LeafKind::dense: return detail::read_dense(in);
    case LeafKind::block_sparse: return detail::read_block_sparse(in);
    case LeafKind::hierarchical: return detail::read_hierarchical(in);
  }
  throw FormatError("unknown leaf kind tag");
}

}  // namespace quadtask
