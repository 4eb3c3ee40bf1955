#pragma once

// Independent reference computations for tests. Nothing here calls into the
// library's kernels.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace oracle {

inline Eigen::MatrixXd product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      const double x = a(i, k);
      if (x == 0.0) continue;
      for (Eigen::Index j = 0; j < b.cols(); ++j) c(i, j) += x * b(k, j);
    }
  }
  return c;
}

inline Eigen::MatrixXd transpose(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd t(a.cols(), a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline double frobenius(const Eigen::MatrixXd& a) {
  long double s = 0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) s += static_cast<long double>(a(i, j)) * a(i, j);
  return static_cast<double>(std::sqrt(s));
}

inline double relative_error(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  const double denom = frobenius(want);
  const double diff = frobenius(got - want);
  return denom == 0.0 ? diff : diff / denom;
}

// Upper triangle kept, strictly lower part zeroed.
inline Eigen::MatrixXd upper(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd u = a;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = j + 1; i < a.rows(); ++i) u(i, j) = 0.0;
  return u;
}

inline Eigen::MatrixXd symmetric_from_upper(const Eigen::MatrixXd& u) {
  Eigen::MatrixXd f = u;
  for (Eigen::Index j = 0; j < u.cols(); ++j)
    for (Eigen::Index i = j + 1; i < u.rows(); ++i) f(i, j) = u(j, i);
  return f;
}

// Random matrix with a block-level sparsity pattern and element-level zeros.
inline Eigen::MatrixXd random_sparse(std::mt19937_64& rng, Eigen::Index n, Eigen::Index block, double block_density,
                                     double element_density = 1.0) {
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  std::bernoulli_distribution keep_block(block_density);
  std::bernoulli_distribution keep_elem(element_density);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index bj = 0; bj < n; bj += block) {
    for (Eigen::Index bi = 0; bi < n; bi += block) {
      if (!keep_block(rng)) continue;
      for (Eigen::Index j = bj; j < std::min(n, bj + block); ++j)
        for (Eigen::Index i = bi; i < std::min(n, bi + block); ++i)
          if (keep_elem(rng)) m(i, j) = val(rng);
    }
  }
  return m;
}

}  // namespace oracle
