#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "maple/matrix.hpp"

namespace maple {

/// Raised when an iterative decomposition fails to converge.
class LinalgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QrResult {
  DenseMatrix q;  ///< p×k, orthonormal columns
  DenseMatrix r;  ///< k×k upper triangular, nonnegative diagonal
  bool rank_deficient = false;
};

/// Thin Householder QR of a p×k matrix (k ≤ p). Flags rank deficiency when a
/// diagonal entry of R drops below 1e-14·‖A‖_F; Q is orthonormal regardless.
QrResult qr_thin(const DenseMatrix& a);

struct EigenDecomposition {
  std::vector<double> values;  ///< descending
  DenseMatrix vectors;         ///< column i pairs with values[i]
};

/// Symmetric eigendecomposition: Householder tridiagonalization followed by
/// implicit-shift QL. The input is symmetrized as (A+Aᵀ)/2; an asymmetry
/// above 1e-10·‖A‖_F is rejected.
EigenDecomposition sym_eig(const DenseMatrix& a);

struct SingularValueDecomposition {
  DenseMatrix u;              ///< p×k, k = min(p, q)
  std::vector<double> sigma;  ///< descending, nonnegative
  DenseMatrix v;              ///< q×k
};

/// Thin SVD through the eigendecomposition of the smaller Gram matrix. Left
/// vectors are re-orthonormalized and completed where σ vanishes.
SingularValueDecomposition svd_exact(const DenseMatrix& a);

/// Best rank-r Frobenius approximation H_r(A). Ties keep the first r triplets
/// in decomposition order.
DenseMatrix hard_threshold_rank(const DenseMatrix& a, std::size_t r);

/// Σ over the top-r eigenpairs with positive eigenvalue of λ v vᵀ.
DenseMatrix psd_rank_projection(const DenseMatrix& a, std::size_t r);

/// Lower Cholesky factor, or nullopt when A is not (numerically) positive definite.
std::optional<DenseMatrix> cholesky(const DenseMatrix& a);

/// log det of an SPD matrix given its Cholesky factor.
double log_det_from_cholesky(const DenseMatrix& chol);

/// A⁻¹ from the Cholesky factor of A.
DenseMatrix inverse_from_cholesky(const DenseMatrix& chol);

/// Solves A X = B with partial pivoting; nullopt when A is singular to working precision.
std::optional<DenseMatrix> solve(const DenseMatrix& a, const DenseMatrix& b);

/// Extends an orthonormal column set `basis` (p×k) with `extra` further
/// orthonormal columns, chosen deterministically from the standard basis.
DenseMatrix complete_orthonormal(const DenseMatrix& basis, std::size_t extra);

}  // namespace maple
