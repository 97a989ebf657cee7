#include <doctest.h>

#include <bit>
#include <cmath>
#include <set>
#include <stdexcept>

#include "maple/operators.hpp"
#include "maple/rng.hpp"
#include "support.hpp"

using namespace maple;
using maple::test::random_matrix;

namespace {

// Sylvester construction: H[i][j] = (−1)^{popcount(i & j)}.
double hadamard_entry(std::uint64_t i, std::uint64_t j) {
  return (std::popcount(i & j) % 2 == 0) ? 1.0 : -1.0;
}

/// Explicit p×p measurement matrices of a fast operator, unscaled.
std::vector<DenseMatrix> materialize(const MeasurementOperator& op) {
  const std::size_t p = op.side();
  std::vector<DenseMatrix> out;
  for (std::uint64_t row : op.row_indices()) {
    DenseMatrix a(p, p);
    for (std::size_t k = 0; k < p * p; ++k) {
      a.data()[k] = hadamard_entry(row, k) * op.sign_diagonal()[k];
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace

TEST_CASE("fwht matches the Sylvester matrix") {
  for (std::size_t n : {1u, 2u, 8u, 64u}) {
    const DenseMatrix x = random_matrix(n, 1, n);
    std::vector<double> y(x.data().begin(), x.data().end());
    fwht(y);
    for (std::size_t i = 0; i < n; ++i) {
      double ref = 0.0;
      for (std::size_t j = 0; j < n; ++j) ref += hadamard_entry(i, j) * x(j, 0);
      CHECK(y[i] == doctest::Approx(ref).epsilon(1e-13));
    }
  }
  std::vector<double> bad(6, 1.0);
  CHECK_THROWS_AS(fwht(bad), std::invalid_argument);
  CHECK(next_power_of_two(1) == 1);
  CHECK(next_power_of_two(17) == 32);
  CHECK(next_power_of_two(64) == 64);
}

TEST_CASE("p = 2, n = 4 samples every Hadamard row once") {
  const auto op = MeasurementOperator::fast_hadamard(2, 4, 5);
  const std::set<std::uint64_t> rows(op.row_indices().begin(), op.row_indices().end());
  CHECK(rows.size() == 4);
  const auto mats = materialize(op);
  const DenseMatrix l = random_matrix(2, 2, 6);
  const auto y = op.apply(l);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(y[i] == doctest::Approx(inner(mats[i], l) / 2.0).epsilon(1e-14));
    for (double v : mats[i].data()) CHECK(std::abs(v) == 1.0);
  }
}

TEST_CASE("zero inputs map to zero") {
  const auto op = MeasurementOperator::fast_hadamard(5, 20, 1);
  for (double v : op.apply(DenseMatrix(5, 5))) CHECK(v == 0.0);
  CHECK(op.adjoint(std::vector<double>(20, 0.0)).max_abs() == 0.0);
}

TEST_CASE("fast operator equals dense materialization at p = 8, n = 32") {
  const auto op = MeasurementOperator::fast_hadamard(8, 32, 11);
  const auto dense = MeasurementOperator::dense_list(8, materialize(op));
  CHECK(op.scale() == doctest::Approx(1.0 / std::sqrt(32.0)));

  const DenseMatrix l = random_matrix(8, 8, 12);
  const auto fast_y = op.apply(l);
  const auto dense_y = dense.apply(l);
  for (std::size_t i = 0; i < 32; ++i) CHECK(std::abs(fast_y[i] - dense_y[i]) <= 1e-10);

  const DenseMatrix v = random_matrix(32, 1, 13);
  CHECK((op.adjoint(v.data()) - dense.adjoint(v.data())).max_abs() <= 1e-10);
}

TEST_CASE("dense list with A_1 = e1 e1^T reads the corner entry") {
  DenseMatrix e11(3, 3);
  e11(0, 0) = 1.0;
  const auto op = MeasurementOperator::dense_list(3, {e11, DenseMatrix::identity(3)});
  const DenseMatrix l = random_matrix(3, 3, 14);
  CHECK(op.apply(l)[0] == doctest::Approx(l(0, 0) / std::sqrt(2.0)));
}

TEST_CASE("adjoint identity on random probes") {
  for (const auto& [p, n] : {std::pair<std::size_t, std::size_t>{8, 32}, {5, 20}, {12, 100}}) {
    const auto op = MeasurementOperator::fast_hadamard(p, n, p * 7);
    for (std::uint64_t s = 0; s < 100; ++s) {
      const DenseMatrix l = random_matrix(p, p, 1000 + s);
      const DenseMatrix v = random_matrix(n, 1, 2000 + s);
      const double lhs = dot(op.apply(l), v.data());
      const double rhs = inner(l, op.adjoint(v.data()));
      CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST_CASE("full sampling is an isometry") {
  const auto op = MeasurementOperator::fast_hadamard(4, 16, 3);
  const DenseMatrix l = random_matrix(4, 4, 15);
  CHECK((op.adjoint(op.apply(l)) - l).max_abs() < 1e-13);
  CHECK(norm2(op.apply(l)) == doctest::Approx(l.frobenius_norm()));
}

TEST_CASE("seeded construction") {
  const auto a = MeasurementOperator::fast_hadamard(6, 30, 21);
  const auto b = MeasurementOperator::fast_hadamard(6, 30, 21);
  const auto c = MeasurementOperator::fast_hadamard(6, 30, 22);
  CHECK(std::equal(a.row_indices().begin(), a.row_indices().end(), b.row_indices().begin()));
  CHECK(std::equal(a.sign_diagonal().begin(), a.sign_diagonal().end(), b.sign_diagonal().begin()));
  CHECK_FALSE(std::equal(a.row_indices().begin(), a.row_indices().end(), c.row_indices().begin()));
  CHECK(a.padded_dimension() == 64);

  CHECK_THROWS_AS((void)MeasurementOperator::fast_hadamard(6, 65, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)a.apply(DenseMatrix(5, 5)), std::invalid_argument);
  CHECK_THROWS_AS((void)a.adjoint(std::vector<double>(29)), std::invalid_argument);
  CHECK_THROWS_AS((void)MeasurementOperator::dense_list(3, {DenseMatrix(2, 2)}),
                  std::invalid_argument);
}
