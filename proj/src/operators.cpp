#include "maple/operators.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "maple/rng.hpp"

namespace maple {

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fwht(std::span<double> x) {
  const std::size_t n = x.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fwht: size not a power of two");
  for (std::size_t h = 1; h < n; h <<= 1) {
    for (std::size_t i = 0; i < n; i += 2 * h) {
      for (std::size_t j = i; j < i + h; ++j) {
        const double a = x[j];
        const double b = x[j + h];
        x[j] = a + b;
        x[j + h] = a - b;
      }
    }
  }
}

MeasurementOperator MeasurementOperator::fast_hadamard(std::size_t p, std::size_t n,
                                                       std::uint64_t seed) {
  if (p == 0 || n == 0) throw std::invalid_argument("fast_hadamard: p and n must be positive");
  MeasurementOperator op;
  op.kind_ = OperatorKind::FastHadamard;
  op.p_ = p;
  op.n_ = n;
  op.padded_ = next_power_of_two(p * p);
  if (n > op.padded_) {
    throw std::invalid_argument("fast_hadamard: n = " + std::to_string(n) +
                                " exceeds padded dimension " + std::to_string(op.padded_));
  }
  op.scale_ = 1.0 / std::sqrt(static_cast<double>(n));

  const CounterRng root(seed);
  CounterRng sign_rng = root.split(0);
  CounterRng row_rng = root.split(1);
  op.signs_.resize(p * p);
  for (double& s : op.signs_) s = sign_rng.rademacher();
  op.rows_ = sample_without_replacement(op.padded_, n, row_rng);
  return op;
}

MeasurementOperator MeasurementOperator::dense_list(std::size_t p,
                                                    std::vector<DenseMatrix> matrices) {
  if (matrices.empty()) throw std::invalid_argument("dense_list: no measurement matrices");
  for (const auto& a : matrices) {
    if (a.rows() != p || a.cols() != p) {
      throw std::invalid_argument("dense_list: measurement matrix is not p×p");
    }
  }
  MeasurementOperator op;
  op.kind_ = OperatorKind::DenseList;
  op.p_ = p;
  op.n_ = matrices.size();
  op.padded_ = p * p;
  op.scale_ = 1.0 / std::sqrt(static_cast<double>(op.n_));
  op.matrices_ = std::move(matrices);
  return op;
}

std::vector<double> MeasurementOperator::apply(const DenseMatrix& l) const {
  if (l.rows() != p_ || l.cols() != p_) {
    throw std::invalid_argument("MeasurementOperator::apply: expected " + std::to_string(p_) +
                                "x" + std::to_string(p_) + " input");
  }
  std::vector<double> out(n_);
  if (kind_ == OperatorKind::DenseList) {
    for (std::size_t i = 0; i < n_; ++i) out[i] = scale_ * inner(matrices_[i], l);
    return out;
  }
  std::vector<double> work(padded_, 0.0);
  const auto data = l.data();
  for (std::size_t k = 0; k < data.size(); ++k) work[k] = signs_[k] * data[k];
  fwht(work);
  for (std::size_t i = 0; i < n_; ++i) out[i] = scale_ * work[rows_[i]];
  return out;
}

DenseMatrix MeasurementOperator::adjoint(std::span<const double> v) const {
  if (v.size() != n_) {
    throw std::invalid_argument("MeasurementOperator::adjoint: expected length " +
                                std::to_string(n_));
  }
  DenseMatrix out(p_, p_);
  if (kind_ == OperatorKind::DenseList) {
    for (std::size_t i = 0; i < n_; ++i) out.axpy(scale_ * v[i], matrices_[i]);
    return out;
  }
  std::vector<double> work(padded_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) work[rows_[i]] = scale_ * v[i];
  fwht(work);  // H is symmetric
  auto data = out.data();
  for (std::size_t k = 0; k < data.size(); ++k) data[k] = signs_[k] * work[k];
  return out;
}

}  // namespace maple
