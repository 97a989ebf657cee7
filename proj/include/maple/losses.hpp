#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "maple/matrix.hpp"
#include "maple/operators.hpp"
#include "maple/rsvd.hpp"

namespace maple {

/// Monotone link g with derivative bounds 0 < μ₁ ≤ g′ ≤ μ₂ and an
/// antiderivative Ω (Ω′ = g) used by the NLARM objective.
struct LinkFunction {
  std::string name;
  std::function<double(double)> g;
  std::function<double(double)> g_prime;
  std::function<double(double)> omega;
  double mu1 = 1.0;
  double mu2 = 1.0;

  /// "identity", "2x-plus-sin" or "tanh-sigmoid"; throws std::invalid_argument otherwise.
  static LinkFunction by_name(std::string_view name);
};

LinkFunction identity_link();
/// g(x) = 2x + sin x, Ω(x) = x² − cos x, μ ∈ [1, 3].
LinkFunction two_x_plus_sin_link();
/// g(x) = (1 − e^{−x})/(1 + e^{−x}) = tanh(x/2). g′ is not bounded away from
/// zero on R; μ₁ is reported over [−10, 10].
LinkFunction tanh_sigmoid_link();

/// Symmetric low-rank matrix Z·diag(values)·Zᵀ with orthonormal Z (p×r).
struct SymmetricLowRank {
  DenseMatrix basis;
  std::vector<double> values;

  [[nodiscard]] std::size_t dimension() const noexcept { return basis.rows(); }
  [[nodiscard]] std::size_t rank() const noexcept { return values.size(); }
  [[nodiscard]] DenseMatrix to_dense() const;
  /// λ_p of the full p×p matrix (includes the implicit zeros when r < p).
  [[nodiscard]] double min_eigenvalue() const;

  static SymmetricLowRank zero(std::size_t p);
};

/// Objective F over p×p matrices.
class LossModel {
 public:
  virtual ~LossModel() = default;

  [[nodiscard]] virtual std::size_t dimension() const = 0;
  [[nodiscard]] virtual double value(const DenseMatrix& l) const = 0;
  [[nodiscard]] virtual DenseMatrix gradient(const DenseMatrix& l) const = 0;

  /// True when the loss can expose L − η∇F(L) implicitly for symmetric
  /// factored iterates (see implicit_step).
  [[nodiscard]] virtual bool has_implicit_step() const { return false; }
  [[nodiscard]] virtual MatVecProvider implicit_step(const SymmetricLowRank& l, double eta) const;
  [[nodiscard]] virtual double value_factored(const SymmetricLowRank& l) const {
    return value(l.to_dense());
  }
};

/// F(L) = Σᵢ Ω(aᵢ) − yᵢ·aᵢ with a = 𝒜(L). The operator's 1/√n normalization
/// carries the 1/n of the averaged objective, so ∇F = 𝒜*(g(𝒜L) − y).
class NlarmLoss final : public LossModel {
 public:
  NlarmLoss(MeasurementOperator op, std::vector<double> y, LinkFunction link);

  [[nodiscard]] std::size_t dimension() const override { return op_.side(); }
  [[nodiscard]] double value(const DenseMatrix& l) const override;
  [[nodiscard]] DenseMatrix gradient(const DenseMatrix& l) const override;

  [[nodiscard]] const MeasurementOperator& op() const noexcept { return op_; }
  [[nodiscard]] const std::vector<double>& observations() const noexcept { return y_; }
  [[nodiscard]] const LinkFunction& link() const noexcept { return link_; }

 private:
  MeasurementOperator op_;
  std::vector<double> y_;
  LinkFunction link_;
};

/// Ridge-regularized logistic loss on a binary matrix, evaluated in softplus
/// form: Σ softplus(L) − Y∘L + λ‖L‖²_F.
class LogisticPcaLoss final : public LossModel {
 public:
  LogisticPcaLoss(DenseMatrix y, double lambda);

  [[nodiscard]] std::size_t dimension() const override { return y_.rows(); }
  [[nodiscard]] double value(const DenseMatrix& l) const override;
  [[nodiscard]] DenseMatrix gradient(const DenseMatrix& l) const override;

  /// Logistic part only (λ term dropped), as plotted in experiments.
  [[nodiscard]] double logistic_loss(const DenseMatrix& l) const;

  [[nodiscard]] double lambda() const noexcept { return lambda_; }
  [[nodiscard]] const DenseMatrix& observations() const noexcept { return y_; }

 private:
  DenseMatrix y_;
  double lambda_;
};

/// Θ = S̄ + L is not positive definite.
class PmeDomainError : public std::domain_error {
 public:
  PmeDomainError(const std::string& what, double lambda_min)
      : std::domain_error(what), lambda_min_(lambda_min) {}
  /// Smallest eigenvalue of the certificate that failed: λ_min(Θ) on the
  /// dense path, λ_min(I + G^{1/2}ΛG^{1/2}) with G = ZᵀS̄⁻¹Z on the factored path.
  [[nodiscard]] double lambda_min() const noexcept { return lambda_min_; }

 private:
  double lambda_min_;
};

/// Gaussian negative log-likelihood in the low-rank part of the precision
/// matrix: F(L) = −log det(S̄ + L) + ⟨S̄ + L, C⟩, S̄ positive diagonal.
/// L enters the log-determinant through its symmetric part.
class PmeLoss final : public LossModel {
 public:
  PmeLoss(std::vector<double> s_bar, DenseMatrix sample_cov);

  [[nodiscard]] std::size_t dimension() const override { return s_bar_.size(); }
  [[nodiscard]] double value(const DenseMatrix& l) const override;
  /// C − (S̄ + L)⁻¹
  [[nodiscard]] DenseMatrix gradient(const DenseMatrix& l) const override;

  [[nodiscard]] bool has_implicit_step() const override { return true; }
  [[nodiscard]] MatVecProvider implicit_step(const SymmetricLowRank& l,
                                             double eta) const override;
  /// Determinant-lemma evaluation in O(p²r) without forming S̄ + L.
  [[nodiscard]] double value_factored(const SymmetricLowRank& l) const override;

  [[nodiscard]] const std::vector<double>& s_bar() const noexcept { return s_bar_; }
  [[nodiscard]] const DenseMatrix& sample_cov() const noexcept { return c_; }

  /// S̄ + L as a dense matrix (symmetric part of L).
  [[nodiscard]] DenseMatrix theta(const DenseMatrix& l) const;

 private:
  std::vector<double> s_bar_;
  DenseMatrix c_;
};

struct ImplicitStepInfo {
  bool dense_fallback = false;  ///< Woodbury inner system was singular
};

/// Provider for M = L − η(C − (S̄+L)⁻¹) with L = ZΛZᵀ. The inverse is applied
/// through Woodbury, (S̄+ZΛZᵀ)⁻¹ = S̄⁻¹ − S̄⁻¹Z(I + ΛG)⁻¹ΛZᵀS̄⁻¹ with
/// G = ZᵀS̄⁻¹Z, so one forward call costs O(pr) plus one product with C.
/// Falls back to a dense inverse (flagged in `info`) if I + ΛG is singular.
MatVecProvider pme_gradient_step_provider(const PmeLoss& loss, const SymmetricLowRank& l,
                                          double eta, ImplicitStepInfo* info = nullptr);

struct CurvatureBounds {
  double m_est;  ///< 1/λ₁(Θ)²
  double big_m_est;  ///< 1/λ_p(Θ)²
};

/// Hessian Θ⁻¹ ⊗ Θ⁻¹ spectrum bounds at L.
CurvatureBounds pme_curvature_bounds(const PmeLoss& loss, const DenseMatrix& l);

/// softplus(x) = log(1 + eˣ), overflow-safe.
double softplus(double x);
/// Logistic sigmoid, overflow-safe.
double sigmoid(double x);

}  // namespace maple
