#pragma once

#include <cmath>
#include <cstdint>
#include <functional>

#include "maple/matrix.hpp"
#include "maple/rng.hpp"

namespace maple::test {

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  CounterRng rng(seed);
  return gaussian_matrix(rows, cols, rng);
}

inline DenseMatrix random_symmetric(std::size_t p, std::uint64_t seed) {
  return symmetrized(random_matrix(p, p, seed));
}

/// Gaussian factor product of exact rank r.
inline DenseMatrix random_low_rank(std::size_t rows, std::size_t cols, std::size_t r,
                                   std::uint64_t seed) {
  return matmul(random_matrix(rows, r, seed), random_matrix(r, cols, seed + 1000));
}

inline double rel_diff(const DenseMatrix& a, const DenseMatrix& b) {
  const double scale = std::max(b.frobenius_norm(), 1e-300);
  return (a - b).frobenius_norm() / scale;
}

/// Triple-loop product, independent of the blocked kernels.
inline DenseMatrix naive_product(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  }
  return c;
}

/// Central finite-difference gradient with h = 1e-5·(1 + ‖L‖_∞).
inline DenseMatrix fd_gradient(const std::function<double(const DenseMatrix&)>& f,
                               const DenseMatrix& l) {
  const double h = 1e-5 * (1.0 + l.max_abs());
  DenseMatrix g(l.rows(), l.cols());
  DenseMatrix probe = l;
  for (std::size_t i = 0; i < l.rows(); ++i) {
    for (std::size_t j = 0; j < l.cols(); ++j) {
      const double keep = probe(i, j);
      probe(i, j) = keep + h;
      const double up = f(probe);
      probe(i, j) = keep - h;
      const double down = f(probe);
      probe(i, j) = keep;
      g(i, j) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

}  // namespace maple::test
