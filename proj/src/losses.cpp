#include "maple/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>

#include "maple/linalg.hpp"

namespace maple {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

LinkFunction identity_link() {
  return {"identity", [](double x) { return x; }, [](double) { return 1.0; },
          [](double x) { return 0.5 * x * x; }, 1.0, 1.0};
}

LinkFunction two_x_plus_sin_link() {
  return {"2x-plus-sin", [](double x) { return 2.0 * x + std::sin(x); },
          [](double x) { return 2.0 + std::cos(x); },
          [](double x) { return x * x - std::cos(x); }, 1.0, 3.0};
}

LinkFunction tanh_sigmoid_link() {
  const auto g = [](double x) { return std::tanh(0.5 * x); };
  const auto g_prime = [](double x) {
    const double t = std::tanh(0.5 * x);
    return 0.5 * (1.0 - t * t);
  };
  // Ω(x) = 2 log cosh(x/2) = |x| + 2 log1p(e^{−|x|}) − 2 log 2
  const auto omega = [](double x) {
    const double a = std::abs(x);
    return a + 2.0 * std::log1p(std::exp(-a)) - 2.0 * std::numbers::ln2;
  };
  const double mu1 = g_prime(10.0);
  return {"tanh-sigmoid", g, g_prime, omega, mu1, 0.5};
}

LinkFunction LinkFunction::by_name(std::string_view name) {
  if (name == "identity") return identity_link();
  if (name == "2x-plus-sin") return two_x_plus_sin_link();
  if (name == "tanh-sigmoid") return tanh_sigmoid_link();
  throw std::invalid_argument("unknown link function '" + std::string(name) + "'");
}

DenseMatrix SymmetricLowRank::to_dense() const {
  const std::size_t p = basis.rows();
  DenseMatrix scaled = basis;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < values.size(); ++k) scaled(i, k) *= values[k];
  return matmul_nt(scaled, basis);
}

double SymmetricLowRank::min_eigenvalue() const {
  double m = values.size() < basis.rows() ? 0.0 : std::numeric_limits<double>::infinity();
  for (double v : values) m = std::min(m, v);
  return m;
}

SymmetricLowRank SymmetricLowRank::zero(std::size_t p) { return {DenseMatrix(p, 0), {}}; }

MatVecProvider LossModel::implicit_step(const SymmetricLowRank&, double) const {
  throw std::logic_error("implicit_step: not supported by this loss");
}

// ---------------------------------------------------------------- NLARM

NlarmLoss::NlarmLoss(MeasurementOperator op, std::vector<double> y, LinkFunction link)
    : op_(std::move(op)), y_(std::move(y)), link_(std::move(link)) {
  if (y_.size() != op_.measurements()) {
    throw std::invalid_argument("NlarmLoss: observation length does not match operator");
  }
}

double NlarmLoss::value(const DenseMatrix& l) const {
  const auto a = op_.apply(l);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += link_.omega(a[i]) - y_[i] * a[i];
  return s;
}

DenseMatrix NlarmLoss::gradient(const DenseMatrix& l) const {
  auto a = op_.apply(l);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = link_.g(a[i]) - y_[i];
  return op_.adjoint(a);
}

// ---------------------------------------------------------------- logistic PCA

LogisticPcaLoss::LogisticPcaLoss(DenseMatrix y, double lambda)
    : y_(std::move(y)), lambda_(lambda) {
  if (!y_.is_square()) throw std::invalid_argument("LogisticPcaLoss: Y must be square");
  if (lambda_ < 0) throw std::invalid_argument("LogisticPcaLoss: lambda must be >= 0");
  for (double v : y_.data()) {
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("LogisticPcaLoss: Y must be binary");
  }
}

double LogisticPcaLoss::logistic_loss(const DenseMatrix& l) const {
  if (l.rows() != y_.rows() || l.cols() != y_.cols()) {
    throw std::invalid_argument("LogisticPcaLoss: dimension mismatch");
  }
  const auto ld = l.data();
  const auto yd = y_.data();
  double s = 0.0;
  for (std::size_t k = 0; k < ld.size(); ++k) s += softplus(ld[k]) - yd[k] * ld[k];
  return s;
}

double LogisticPcaLoss::value(const DenseMatrix& l) const {
  const double f = l.frobenius_norm();
  return logistic_loss(l) + lambda_ * f * f;
}

DenseMatrix LogisticPcaLoss::gradient(const DenseMatrix& l) const {
  if (l.rows() != y_.rows() || l.cols() != y_.cols()) {
    throw std::invalid_argument("LogisticPcaLoss: dimension mismatch");
  }
  DenseMatrix g(l.rows(), l.cols());
  const auto ld = l.data();
  const auto yd = y_.data();
  auto gd = g.data();
  for (std::size_t k = 0; k < ld.size(); ++k) {
    gd[k] = sigmoid(ld[k]) - yd[k] + 2.0 * lambda_ * ld[k];
  }
  return g;
}

// ---------------------------------------------------------------- PME

namespace {

struct FactorGeometry {
  DenseMatrix w;         // S̄⁻¹Z, p×r
  DenseMatrix g;         // ZᵀS̄⁻¹Z, r×r
  double min_certificate;  // λ_min(I + G^{1/2}ΛG^{1/2})
  double log_det_certificate;
};

FactorGeometry factor_geometry(const std::vector<double>& s_bar, const SymmetricLowRank& l) {
  const std::size_t p = s_bar.size();
  const std::size_t r = l.rank();
  FactorGeometry out{l.basis, DenseMatrix(r, r), std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < r; ++k) out.w(i, k) /= s_bar[i];
  if (r == 0) return out;
  out.g = symmetrized(matmul_tn(l.basis, out.w));

  const auto ge = sym_eig(out.g);
  DenseMatrix g_half(r, r);
  for (std::size_t t = 0; t < r; ++t) {
    const double s = std::sqrt(std::max(ge.values[t], 0.0));
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j) g_half(i, j) += s * ge.vectors(i, t) * ge.vectors(j, t);
  }
  DenseMatrix k = DenseMatrix::identity(r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < r; ++t) s += g_half(i, t) * l.values[t] * g_half(t, j);
      k(i, j) += s;
    }
  const auto ke = sym_eig(symmetrized(k));
  out.min_certificate = ke.values.back();
  if (out.min_certificate > 0) {
    for (double v : ke.values) out.log_det_certificate += std::log(v);
  }
  return out;
}

}  // namespace

PmeLoss::PmeLoss(std::vector<double> s_bar, DenseMatrix sample_cov)
    : s_bar_(std::move(s_bar)), c_(std::move(sample_cov)) {
  const std::size_t p = s_bar_.size();
  if (c_.rows() != p || c_.cols() != p) {
    throw std::invalid_argument("PmeLoss: covariance dimension does not match S̄");
  }
  for (double s : s_bar_) {
    if (!(s > 0.0)) throw std::invalid_argument("PmeLoss: S̄ entries must be positive");
  }
  if (asymmetry(c_) > 1e-10 * std::max(1.0, c_.frobenius_norm())) {
    throw std::invalid_argument("PmeLoss: sample covariance is not symmetric");
  }
}

DenseMatrix PmeLoss::theta(const DenseMatrix& l) const {
  if (l.rows() != s_bar_.size() || l.cols() != s_bar_.size()) {
    throw std::invalid_argument("PmeLoss: dimension mismatch");
  }
  DenseMatrix t = symmetrized(l);
  for (std::size_t i = 0; i < s_bar_.size(); ++i) t(i, i) += s_bar_[i];
  return t;
}

namespace {

DenseMatrix checked_cholesky(const DenseMatrix& theta) {
  auto chol = cholesky(theta);
  if (!chol) {
    const double lmin = sym_eig(theta).values.back();
    throw PmeDomainError("S̄ + L is not positive definite (λ_min = " + std::to_string(lmin) + ")",
                         lmin);
  }
  return *std::move(chol);
}

}  // namespace

double PmeLoss::value(const DenseMatrix& l) const {
  const DenseMatrix t = theta(l);
  const DenseMatrix chol = checked_cholesky(t);
  // ⟨S̄ + L, C⟩ uses L itself; C is symmetric so only sym(L) contributes.
  double trace = inner(l, c_);
  for (std::size_t i = 0; i < s_bar_.size(); ++i) trace += s_bar_[i] * c_(i, i);
  return -log_det_from_cholesky(chol) + trace;
}

DenseMatrix PmeLoss::gradient(const DenseMatrix& l) const {
  const DenseMatrix chol = checked_cholesky(theta(l));
  return c_ - inverse_from_cholesky(chol);
}

double PmeLoss::value_factored(const SymmetricLowRank& l) const {
  if (l.dimension() != s_bar_.size()) throw std::invalid_argument("PmeLoss: dimension mismatch");
  const auto geo = factor_geometry(s_bar_, l);
  if (!(geo.min_certificate > 0.0)) {
    throw PmeDomainError("S̄ + ZΛZᵀ is not positive definite", geo.min_certificate);
  }
  double log_det = geo.log_det_certificate;
  double trace = 0.0;
  for (std::size_t i = 0; i < s_bar_.size(); ++i) {
    log_det += std::log(s_bar_[i]);
    trace += s_bar_[i] * c_(i, i);
  }
  if (l.rank() > 0) {
    const DenseMatrix cz = matmul(c_, l.basis);
    for (std::size_t k = 0; k < l.rank(); ++k) {
      double zcz = 0.0;
      for (std::size_t i = 0; i < s_bar_.size(); ++i) zcz += l.basis(i, k) * cz(i, k);
      trace += l.values[k] * zcz;
    }
  }
  return -log_det + trace;
}

MatVecProvider PmeLoss::implicit_step(const SymmetricLowRank& l, double eta) const {
  return pme_gradient_step_provider(*this, l, eta);
}

MatVecProvider pme_gradient_step_provider(const PmeLoss& loss, const SymmetricLowRank& l,
                                          double eta, ImplicitStepInfo* info) {
  const auto& s_bar = loss.s_bar();
  const std::size_t p = s_bar.size();
  const std::size_t r = l.rank();
  if (l.dimension() != p) throw std::invalid_argument("pme_gradient_step_provider: dimension");

  auto geo = factor_geometry(s_bar, l);
  if (!(geo.min_certificate > 0.0)) {
    throw PmeDomainError("S̄ + ZΛZᵀ is not positive definite", geo.min_certificate);
  }

  struct State {
    std::vector<double> s_bar;
    DenseMatrix c;
    DenseMatrix z;
    std::vector<double> lambda;
    DenseMatrix w;       // S̄⁻¹Z
    DenseMatrix middle;  // (I + ΛG)⁻¹Λ
    std::optional<DenseMatrix> dense_inverse;
    double eta;
  };
  auto state = std::make_shared<State>();
  state->s_bar = s_bar;
  state->c = loss.sample_cov();
  state->z = l.basis;
  state->lambda = l.values;
  state->w = std::move(geo.w);
  state->eta = eta;

  bool fallback = false;
  if (r > 0) {
    DenseMatrix inner_system = DenseMatrix::identity(r);
    DenseMatrix lambda_diag(r, r);
    for (std::size_t i = 0; i < r; ++i) {
      lambda_diag(i, i) = l.values[i];
      for (std::size_t j = 0; j < r; ++j) inner_system(i, j) += l.values[i] * geo.g(i, j);
    }
    auto middle = solve(inner_system, lambda_diag);
    if (middle) {
      state->middle = *std::move(middle);
    } else {
      fallback = true;
      state->dense_inverse = inverse_from_cholesky(checked_cholesky(loss.theta(l.to_dense())));
    }
  }
  if (info) info->dense_fallback = fallback;

  auto forward = [state, p, r](std::span<const double> v) {
    if (v.size() != p) throw std::invalid_argument("pme provider: bad input length");
    std::vector<double> out(p, 0.0);
    std::vector<double> inv_v(p);
    if (state->dense_inverse) {
      inv_v = matvec(*state->dense_inverse, v);
    } else {
      for (std::size_t i = 0; i < p; ++i) inv_v[i] = v[i] / state->s_bar[i];
      if (r > 0) {
        const auto wtv = matvec_t(state->w, v);
        const auto mid = matvec(state->middle, wtv);
        const auto back = matvec(state->w, mid);
        for (std::size_t i = 0; i < p; ++i) inv_v[i] -= back[i];
      }
    }
    if (r > 0) {
      auto ztv = matvec_t(state->z, v);
      for (std::size_t k = 0; k < r; ++k) ztv[k] *= state->lambda[k];
      out = matvec(state->z, ztv);
    }
    const auto cv = matvec(state->c, v);
    for (std::size_t i = 0; i < p; ++i) out[i] -= state->eta * (cv[i] - inv_v[i]);
    return out;
  };
  return {p, p, forward, forward};
}

CurvatureBounds pme_curvature_bounds(const PmeLoss& loss, const DenseMatrix& l) {
  const DenseMatrix t = loss.theta(l);
  checked_cholesky(t);
  const auto eig = sym_eig(t);
  const double top = eig.values.front();
  const double bottom = eig.values.back();
  return {1.0 / (top * top), 1.0 / (bottom * bottom)};
}

}  // namespace maple
