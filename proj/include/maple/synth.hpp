#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "maple/losses.hpp"
#include "maple/matrix.hpp"
#include "maple/operators.hpp"

namespace maple {

struct GroundTruth {
  DenseMatrix l_star;
  std::size_t r_star = 0;
  double kappa = 1.0;
  std::uint64_t seed = 0;
};

/// L* = U·D·Uᵀ with U the Q factor of a Gaussian p×r* matrix,
/// D = diag(κ, 1, …, 1).
GroundTruth gen_lowrank(std::size_t p, std::size_t r_star, double kappa, std::uint64_t seed);

/// y = g(𝒜(L*)) + e with e ~ N(0, σ²) i.i.d.
std::vector<double> gen_nlarm(const GroundTruth& gt, const MeasurementOperator& op,
                              const LinkFunction& link, double noise_sigma, std::uint64_t seed);

/// Y_ij ~ Bernoulli(σ(L*_ij)) independently.
DenseMatrix gen_lpca(const GroundTruth& gt, std::uint64_t seed);

struct PmeGenOptions {
  std::vector<double> s_bar;  ///< empty: all entries 2.0
  double kappa = 2.0;         ///< condition number of L* before scaling
  /// Rescale so ‖L*‖₂ = fraction·min(S̄); nullopt keeps the raw spectrum.
  std::optional<double> spectral_fraction = 0.5;
};

struct PmeInstance {
  std::vector<double> s_bar;
  GroundTruth truth;  ///< PSD rank-r* L*
  DenseMatrix sigma;  ///< population covariance (S̄ + L*)⁻¹
  DenseMatrix samples;     ///< n×p, rows x_i ~ N(0, Σ)
  DenseMatrix sample_cov;  ///< C = (1/n) Σ x_i x_iᵀ, no centering

  [[nodiscard]] PmeLoss loss() const { return {s_bar, sample_cov}; }
};

/// Throws std::domain_error when S̄ + L* is not positive definite.
PmeInstance gen_pme(std::size_t p, std::size_t r_star, std::size_t n,
                    const PmeGenOptions& options, std::uint64_t seed);

struct Metrics {
  double rel_error = 0.0;  ///< absolute ‖L̂‖_F when L* = 0
  bool success = false;
};

Metrics metrics(const DenseMatrix& estimate, const GroundTruth& gt, double threshold = 1e-3);

struct InstanceMetadata {
  std::uint64_t seed = 0;
  std::size_t p = 0;
  std::size_t r_star = 0;
  double kappa = 1.0;
  std::size_t n = 0;
  double sigma = 0.0;
};

void write_metadata_json(const std::filesystem::path& path, const InstanceMetadata& meta);
InstanceMetadata read_metadata_json(const std::filesystem::path& path);

}  // namespace maple
