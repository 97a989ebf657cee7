#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace maple {

/// Row-major dense matrix of doubles. The universal numeric carrier of the
/// library: iterates, gradients, bases and sample matrices all live here.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> d);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
  [[nodiscard]] bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  [[nodiscard]] std::span<double> row(std::size_t i) noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

  [[nodiscard]] std::vector<double> column(std::size_t j) const;
  void set_column(std::size_t j, std::span<const double> values);

  [[nodiscard]] DenseMatrix transposed() const;
  [[nodiscard]] double frobenius_norm() const noexcept;
  [[nodiscard]] double max_abs() const noexcept;
  [[nodiscard]] bool all_finite() const noexcept;

  /// Columns [first, first + count) as a new matrix.
  [[nodiscard]] DenseMatrix columns(std::size_t first, std::size_t count) const;

  DenseMatrix& operator+=(const DenseMatrix& other);
  DenseMatrix& operator-=(const DenseMatrix& other);
  DenseMatrix& operator*=(double s) noexcept;

  /// this += s * other
  void axpy(double s, const DenseMatrix& other);

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(double s, DenseMatrix a);

/// a * b
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// aᵀ * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a * bᵀ
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x);
/// aᵀ x
std::vector<double> matvec_t(const DenseMatrix& a, std::span<const double> x);

/// Frobenius inner product ⟨a, b⟩ = tr(aᵀb).
double inner(const DenseMatrix& a, const DenseMatrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// (a + aᵀ) / 2
DenseMatrix symmetrized(const DenseMatrix& a);

/// ‖a − aᵀ‖_F
double asymmetry(const DenseMatrix& a);

}  // namespace maple
