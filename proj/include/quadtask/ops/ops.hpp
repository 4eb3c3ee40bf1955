#pragma once

#include <mutex>
#include <span>
#include <vector>

#include "quadtask/matrix/quadtree.hpp"

namespace quadtask {

// One subproduct skipped by the approximate multiply.
struct PrunedProduct {
  int level = 0;  // level of the operand subtrees
  double norm_a = 0.0;
  double norm_b = 0.0;
  double share = 0.0;  // error budget the subproduct was compared against
};

// Thread-safe record of pruned subproducts.
class PruneLog {
 public:
  void add(const PrunedProduct& p);
  std::vector<PrunedProduct> entries() const;
  // Sum of norm_a * norm_b over all pruned subproducts.
  double bound() const;
  void clear();

 private:
  mutable std::mutex mutex_;
  std::vector<PrunedProduct> entries_;
};

struct MultiplyVariant {
  enum class Kind { regular, symmetric, symmetric_square, rank_k, approximate };

  Kind kind = Kind::regular;
  double tau = 0.0;

  static MultiplyVariant regular() { return {Kind::regular, 0.0}; }
  static MultiplyVariant symmetric() { return {Kind::symmetric, 0.0}; }
  static MultiplyVariant symmetric_square() { return {Kind::symmetric_square, 0.0}; }
  static MultiplyVariant rank_k() { return {Kind::rank_k, 0.0}; }
  static MultiplyVariant approximate(double tau) { return {Kind::approximate, tau}; }
};

// Registers the matrix task types on a runtime. Every operation below calls
// this; repeated calls are no-ops.
void register_matrix_task_types(Runtime& rt);

// Each operation registers one root task on worker 0, runs the runtime to
// completion and returns the new matrix. Inputs are never modified.

// alpha*A + beta*B. Both operands symmetric or both general.
Matrix add(Runtime& rt, const Matrix& a, const Matrix& b, double alpha = 1.0, double beta = 1.0);
Matrix scale(Runtime& rt, const Matrix& a, double alpha);

// A + cI. Only subtrees on the diagonal are rebuilt.
Matrix add_scaled_identity(Runtime& rt, const Matrix& a, double c);

// regular:          A*B, both general
// symmetric:        S*B or B*S with exactly one symmetric operand; general result
// symmetric_square: S*S, pass the same matrix twice; symmetric result
// rank_k:           A*A^T, pass the same matrix twice; symmetric result
// approximate(tau): A*B skipping subproducts with small norm products;
//                   ||AB - C||_F <= tau. Pruned subproducts go to `log`.
Matrix multiply(Runtime& rt, const Matrix& a, const Matrix& b, const MultiplyVariant& variant = {},
                PruneLog* log = nullptr);

// op(A) * op(B) for general operands.
Matrix multiply_transposed(Runtime& rt, const Matrix& a, const Matrix& b, Transpose ta, Transpose tb);

Matrix symmetric_square(Runtime& rt, const Matrix& s);
// A*A^T (Transpose::no) or A^T*A (Transpose::yes), upper triangle stored.
Matrix rank_k(Runtime& rt, const Matrix& a, Transpose t = Transpose::no);

struct TruncationResult {
  Matrix matrix;
  double removed_norm = 0.0;
};

// Drops the globally smallest leaf units (blocks, or elements for dense
// leaves) while the dropped squared norms sum to at most tau^2.
TruncationResult truncate(Runtime& rt, const Matrix& a, double tau);

// Upper triangular Z with Z^T A Z = I for a symmetric positive definite A.
// Throws NotPositiveDefinite naming the global diagonal index on breakdown.
Matrix inverse_cholesky(Runtime& rt, const Matrix& a);

Matrix assign_from_triplets(Runtime& rt, const MatrixParams& params, std::span<const Triplet> entries,
                            bool symmetric = false);
std::vector<double> extract_elements(Runtime& rt, const Matrix& m, std::span<const Coord> indices);

}  // namespace quadtask
