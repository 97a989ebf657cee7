#include "maple/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace maple {

std::uint64_t CounterRng::below(std::uint64_t bound) noexcept {
  if (bound <= 1) return 0;
  const std::uint64_t limit = max() - (max() % bound);
  std::uint64_t x = 0;
  do {
    x = (*this)();
  } while (x >= limit);
  return x % bound;
}

double CounterRng::normal() noexcept {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_normal_ = true;
  return radius * std::cos(angle);
}

DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, CounterRng& rng) {
  DenseMatrix m(rows, cols);
  for (double& x : m.data()) x = rng.normal();
  return m;
}

std::vector<double> gaussian_vector(std::size_t n, CounterRng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

std::vector<std::uint64_t> sample_without_replacement(std::uint64_t range, std::uint64_t count,
                                                      CounterRng& rng) {
  if (count > range) throw std::invalid_argument("sample_without_replacement: count > range");
  std::vector<std::uint64_t> pool(range);
  std::iota(pool.begin(), pool.end(), std::uint64_t{0});
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t j = i + rng.below(range - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace maple
