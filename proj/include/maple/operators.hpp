#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "maple/matrix.hpp"

namespace maple {

enum class OperatorKind { FastHadamard, DenseList };

/// Linear map 𝒜: R^{p×p} → R^n, (𝒜L)_i = ⟨A_i, L⟩/√n.
///
/// FastHadamard: A_i is row row_indices[i] of H·D reshaped row-major, where H
/// is the unnormalized ±1 Walsh–Hadamard matrix of the padded size
/// N = 2^⌈log₂ p²⌉ and D = diag(sign_diagonal). vec(L) is zero-padded to N, so
/// the padding never shows through apply/adjoint. Cost O(N log N) per call.
///
/// DenseList: explicit A_i, used for tests and small designs.
///
/// The 1/√n factor sits in both apply and adjoint, giving E[𝒜*𝒜] = I.
class MeasurementOperator {
 public:
  static MeasurementOperator fast_hadamard(std::size_t p, std::size_t n, std::uint64_t seed);
  static MeasurementOperator dense_list(std::size_t p, std::vector<DenseMatrix> matrices);

  [[nodiscard]] OperatorKind kind() const noexcept { return kind_; }
  [[nodiscard]] std::size_t side() const noexcept { return p_; }
  [[nodiscard]] std::size_t measurements() const noexcept { return n_; }
  [[nodiscard]] std::size_t padded_dimension() const noexcept { return padded_; }
  [[nodiscard]] double scale() const noexcept { return scale_; }

  [[nodiscard]] std::span<const double> sign_diagonal() const noexcept { return signs_; }
  [[nodiscard]] std::span<const std::uint64_t> row_indices() const noexcept { return rows_; }
  [[nodiscard]] const std::vector<DenseMatrix>& matrices() const noexcept { return matrices_; }

  [[nodiscard]] std::vector<double> apply(const DenseMatrix& l) const;
  [[nodiscard]] DenseMatrix adjoint(std::span<const double> v) const;

 private:
  MeasurementOperator() = default;

  OperatorKind kind_ = OperatorKind::FastHadamard;
  std::size_t p_ = 0;
  std::size_t n_ = 0;
  std::size_t padded_ = 0;
  double scale_ = 1.0;
  std::vector<double> signs_;
  std::vector<std::uint64_t> rows_;
  std::vector<DenseMatrix> matrices_;
};

/// In-place unnormalized fast Walsh–Hadamard transform; size must be a power of two.
void fwht(std::span<double> x);

/// Smallest power of two ≥ n (n ≥ 1).
std::size_t next_power_of_two(std::size_t n);

}  // namespace maple
