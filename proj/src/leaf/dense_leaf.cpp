#include "quadtask/leaf/dense_leaf.hpp"

#include <cmath>

#include "quadtask/error.hpp"

namespace quadtask {

DenseLeaf::DenseLeaf(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() != values_.cols()) throw DimensionMismatch("dense leaf must be square");
}

namespace detail {

DenseLeaf multiply(const DenseLeaf& a, const DenseLeaf& b, Transpose ta, Transpose tb) {
  const auto& x = a.values();
  const auto& y = b.values();
  Eigen::MatrixXd c(x.rows(), y.cols());
  if (!is_transposed(ta) && !is_transposed(tb)) {
    c.noalias() = x * y;
  } else if (is_transposed(ta) && !is_transposed(tb)) {
    c.noalias() = x.transpose() * y;
  } else if (!is_transposed(ta)) {
    c.noalias() = x * y.transpose();
  } else {
    c.noalias() = x.transpose() * y.transpose();
  }
  return DenseLeaf(std::move(c));
}

DenseLeaf add(const DenseLeaf& a, const DenseLeaf& b, double alpha, double beta) {
  return DenseLeaf(Eigen::MatrixXd(alpha * a.values() + beta * b.values()));
}

DenseLeaf scale(const DenseLeaf& a, double alpha) { return DenseLeaf(Eigen::MatrixXd(alpha * a.values())); }

double norm_squared(const DenseLeaf& a) { return a.values().squaredNorm(); }

bool is_zero(const DenseLeaf& a) { return (a.values().array() == 0.0).all(); }

std::size_t nnz(const DenseLeaf& a) { return static_cast<std::size_t>((a.values().array() != 0.0).count()); }

Eigen::MatrixXd to_dense(const DenseLeaf& a) { return a.values(); }

double element(const DenseLeaf& a, Index row, Index col) { return a.values()(row, col); }

std::vector<double> unit_norms(const DenseLeaf& a) {
  std::vector<double> out;
  const double* p = a.values().data();
  for (Index i = 0; i < a.values().size(); ++i) {
    if (p[i] != 0.0) out.push_back(std::abs(p[i]));
  }
  return out;
}

DenseLeaf drop_units(const DenseLeaf& a, double threshold) {
  Eigen::MatrixXd v = a.values();
  v = (v.array().abs() <= threshold).select(0.0, v);
  return DenseLeaf(std::move(v));
}

std::size_t serialized_size(const DenseLeaf& a) {
  return 1 + 4 + static_cast<std::size_t>(a.values().size()) * sizeof(double);
}

void write(ByteWriter& out, const DenseLeaf& a) {
  out.u8(static_cast<std::uint8_t>(LeafKind::dense));
  out.u32(static_cast<std::uint32_t>(a.dim()));
  out.f64s(std::span<const double>(a.values().data(), static_cast<std::size_t>(a.values().size())));
}

DenseLeaf read_dense(ByteReader& in) {
  const Index n = in.u32();
  Eigen::MatrixXd v(n, n);
  in.f64s(std::span<double>(v.data(), static_cast<std::size_t>(v.size())));
  return DenseLeaf(std::move(v));
}

}  // namespace detail
}  // namespace quadtask
