#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "maple/matrix.hpp"

namespace maple {

/// Implicit matrix M given through its action v ↦ Mv and v ↦ Mᵀv.
///
/// Implementations must tolerate concurrent read-only probing, or be used from
/// one thread only; the solvers call them sequentially.
struct MatVecProvider {
  using Apply = std::function<std::vector<double>(std::span<const double>)>;

  std::size_t rows = 0;
  std::size_t cols = 0;
  Apply forward;
  Apply transpose_forward;

  /// Wraps a copy of a dense matrix.
  static MatVecProvider from_dense(DenseMatrix m);

  /// Materializes M column by column (cols forward calls). Test/diagnostic use.
  [[nodiscard]] DenseMatrix to_dense() const;
};

struct BkSvdConfig {
  std::size_t rank = 1;          ///< target rank r
  std::size_t krylov_iters = 2;  ///< q, multiplications by MMᵀ (q + 1 blocks)
  std::uint64_t seed = 0;
  std::size_t oversample = 0;  ///< extra start-block columns
};

/// Output of the approximate tail projection: orthonormal Z (p×r) and
/// σ̂_i = ‖Mᵀz_i‖, descending.
struct RankRSubspace {
  DenseMatrix basis;
  std::vector<double> approx_singular_values;
};

struct BkSvdResult {
  RankRSubspace subspace;
  DenseMatrix coefficients;  ///< ZᵀM, r×cols
  std::size_t redraws = 0;   ///< start blocks re-drawn after breakdown
};

/// The Krylov block lost rank and the deficiency is not explained by an
/// invariant subspace, on every permitted redraw.
class BkSvdBreakdown : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Randomized Block Krylov SVD. Builds K = [MΠ, (MMᵀ)MΠ, …, (MMᵀ)^q MΠ]
/// with a Gaussian start block, orthonormalizing after every multiplication,
/// then extracts the top-r Ritz directions of QᵀM.
BkSvdResult bksvd_detailed(const MatVecProvider& m, const BkSvdConfig& cfg);
BkSvdResult bksvd_detailed(const DenseMatrix& m, const BkSvdConfig& cfg);

RankRSubspace bksvd(const MatVecProvider& m, const BkSvdConfig& cfg);
RankRSubspace bksvd(const DenseMatrix& m, const BkSvdConfig& cfg);

struct TailProjection {
  DenseMatrix projected;  ///< ZZᵀL
  RankRSubspace subspace;
};

/// Approximate tail projection T(L) = ZZᵀL with Z from bksvd. Column space
/// only; no two-sided projection.
TailProjection tail_project(const DenseMatrix& l, const BkSvdConfig& cfg);
TailProjection tail_project(const MatVecProvider& l, const BkSvdConfig& cfg);

/// ‖T(L) − B‖²_F / ‖L − B‖²_F; 0 when L = B.
double projection_contraction_ratio(const DenseMatrix& l, const DenseMatrix& b,
                                    const BkSvdConfig& cfg);

/// 1 + (2/√(1−ε))·√(r*/(r−r*)), the near non-expansiveness constant of an
/// approximate tail projection with per-vector guarantee. +∞ when r ≤ r*.
double contraction_ratio_bound(std::size_t r_star, std::size_t r, double eps);

}  // namespace maple
