#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "maple/matrix.hpp"

namespace maple {

/// Counter-based 64-bit generator. Output k of stream `key` is
/// mix64(key + (k+1)·γ) with γ the golden-ratio increment and mix64 the
/// SplitMix64 finalizer, so draws are a pure function of (key, counter) and
/// identical on every platform.
///
/// Streams: `split(id)` derives an independent key from (key, id); trials and
/// iterations take their own stream instead of sharing a sequence.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed) noexcept : key_(mix64(seed ^ kSeedSalt)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
  }

  [[nodiscard]] CounterRng split(std::uint64_t stream_id) const noexcept {
    CounterRng child(0);
    child.key_ = mix64(key_ ^ mix64(stream_id + kStreamSalt));
    return child;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound), rejection-sampled (no modulo bias).
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Standard normal via Box–Muller; the second variate is cached.
  double normal() noexcept;

  /// ±1 with equal probability.
  double rademacher() noexcept { return ((*this)() >> 63) ? 1.0 : -1.0; }

  [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

  static constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static constexpr std::uint64_t kSeedSalt = 0x6a09e667f3bcc909ULL;
  static constexpr std::uint64_t kStreamSalt = 0xbb67ae8584caa73bULL;

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

/// rows×cols matrix of i.i.d. standard normals, filled row-major.
DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, CounterRng& rng);

std::vector<double> gaussian_vector(std::size_t n, CounterRng& rng);

/// First `count` entries of a seeded Fisher–Yates shuffle of {0, …, range−1}.
std::vector<std::uint64_t> sample_without_replacement(std::uint64_t range, std::uint64_t count,
                                                      CounterRng& rng);

}  // namespace maple
