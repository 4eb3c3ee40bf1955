#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "quadtask/bytes.hpp"
#include "quadtask/leaf/leaf_types.hpp"

namespace quadtask {

// Square leaf stored as a full column-major array.
class DenseLeaf {
 public:
  explicit DenseLeaf(Index n) : values_(Eigen::MatrixXd::Zero(n, n)) {}
  explicit DenseLeaf(Eigen::MatrixXd values);

  Index dim() const { return values_.rows(); }
  const Eigen::MatrixXd& values() const { return values_; }

 private:
  Eigen::MatrixXd values_;
};

namespace detail {

DenseLeaf multiply(const DenseLeaf& a, const DenseLeaf& b, Transpose ta, Transpose tb);
DenseLeaf add(const DenseLeaf& a, const DenseLeaf& b, double alpha, double beta);
DenseLeaf scale(const DenseLeaf& a, double alpha);
double norm_squared(const DenseLeaf& a);
bool is_zero(const DenseLeaf& a);
std::size_t nnz(const DenseLeaf& a);
Eigen::MatrixXd to_dense(const DenseLeaf& a);
double element(const DenseLeaf& a, Index row, Index col);

// Truncation works per element for the dense kind.
std::vector<double> unit_norms(const DenseLeaf& a);
DenseLeaf drop_units(const DenseLeaf& a, double threshold);

std::size_t serialized_size(const DenseLeaf& a);
void write(ByteWriter& out, const DenseLeaf& a);
DenseLeaf read_dense(ByteReader& in);

}  // namespace detail
}  // namespace quadtask
