#include "maple/rsvd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "maple/linalg.hpp"
#include "maple/rng.hpp"

namespace maple {

namespace {

constexpr std::size_t kMaxRedraws = 3;
constexpr double kDropTolerance = 1e-10;
constexpr double kInvarianceTolerance = 1e-8;

// Block action of M on p×k matrices, shared by the dense and implicit paths.
struct BlockOperator {
  std::size_t rows;
  std::size_t cols;
  std::function<DenseMatrix(const DenseMatrix&)> apply;    // M X
  std::function<DenseMatrix(const DenseMatrix&)> apply_t;  // Mᵀ X
};

DenseMatrix apply_columns(const MatVecProvider::Apply& f, std::size_t out_rows,
                          const DenseMatrix& x) {
  DenseMatrix out(out_rows, x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    const auto col = x.column(j);
    const auto y = f(col);
    if (y.size() != out_rows) throw std::invalid_argument("MatVecProvider: bad output length");
    out.set_column(j, y);
  }
  return out;
}

BlockOperator block_operator(const MatVecProvider& m) {
  return {m.rows, m.cols,
          [&m](const DenseMatrix& x) { return apply_columns(m.forward, m.rows, x); },
          [&m](const DenseMatrix& x) { return apply_columns(m.transpose_forward, m.cols, x); }};
}

BlockOperator block_operator(const DenseMatrix& m) {
  return {m.rows(), m.cols(), [&m](const DenseMatrix& x) { return matmul(m, x); },
          [&m](const DenseMatrix& x) { return matmul_tn(m, x); }};
}

// Appends to `basis` the columns of `block` that survive two rounds of
// Gram–Schmidt against the basis and each other. Returns the accepted columns.
DenseMatrix accept_columns(std::vector<std::vector<double>>& basis, const DenseMatrix& block) {
  const std::size_t p = block.rows();
  double largest = 0.0;
  for (std::size_t j = 0; j < block.cols(); ++j) largest = std::max(largest, norm2(block.column(j)));

  std::vector<std::vector<double>> accepted;
  if (largest > 0.0) {
    for (std::size_t j = 0; j < block.cols(); ++j) {
      if (basis.size() >= p) break;
      auto x = block.column(j);
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& q : basis) {
          const double c = dot(q, x);
          for (std::size_t i = 0; i < p; ++i) x[i] -= c * q[i];
        }
      }
      const double residual = norm2(x);
      if (residual <= kDropTolerance * largest) continue;
      for (double& xi : x) xi /= residual;
      basis.push_back(x);
      accepted.push_back(std::move(x));
    }
  }
  DenseMatrix out(p, accepted.size());
  for (std::size_t j = 0; j < accepted.size(); ++j) out.set_column(j, accepted[j]);
  return out;
}

DenseMatrix as_matrix(const std::vector<std::vector<double>>& columns, std::size_t rows) {
  DenseMatrix out(rows, columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) out.set_column(j, columns[j]);
  return out;
}

// True when range(M) lies inside span(basis), probed with random vectors.
bool spans_range(const BlockOperator& op, const DenseMatrix& q, CounterRng& rng) {
  const DenseMatrix probes = gaussian_matrix(op.cols, 2, rng);
  const DenseMatrix images = op.apply(probes);
  for (std::size_t j = 0; j < images.cols(); ++j) {
    auto v = images.column(j);
    const double before = norm2(v);
    if (before == 0.0) continue;
    if (q.cols() > 0) {
      const auto coeff = matvec_t(q, v);
      const auto back = matvec(q, coeff);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= back[i];
    }
    if (norm2(v) > kInvarianceTolerance * before) return false;
  }
  return true;
}

BkSvdResult run_bksvd(const BlockOperator& op, const BkSvdConfig& cfg) {
  if (cfg.rank < 1) throw std::invalid_argument("bksvd: rank must be >= 1");
  if (cfg.krylov_iters < 1) throw std::invalid_argument("bksvd: krylov_iters must be >= 1");
  if (cfg.rank > op.rows || cfg.rank > op.cols) {
    throw std::invalid_argument("bksvd: rank exceeds matrix dimension");
  }
  const std::size_t p = op.rows;
  const std::size_t width = std::min(cfg.rank + cfg.oversample, op.cols);
  const CounterRng root(cfg.seed);

  for (std::size_t attempt = 0; attempt <= kMaxRedraws; ++attempt) {
    CounterRng rng = root.split(attempt);
    std::vector<std::vector<double>> basis;

    DenseMatrix block = accept_columns(basis, op.apply(gaussian_matrix(op.cols, width, rng)));
    for (std::size_t it = 0; it < cfg.krylov_iters && block.cols() > 0 && basis.size() < p;
         ++it) {
      const DenseMatrix back = qr_thin(op.apply_t(block)).q;
      block = accept_columns(basis, op.apply(back));
    }

    DenseMatrix q = as_matrix(basis, p);
    if (q.cols() < cfg.rank && !spans_range(op, q, rng)) continue;

    // Rayleigh–Ritz on QᵀM = (MᵀQ)ᵀ.
    BkSvdResult out;
    out.redraws = attempt;
    const std::size_t found = std::min(cfg.rank, q.cols());
    DenseMatrix z(p, found);
    std::vector<double> sigma(found);
    if (found > 0) {
      const DenseMatrix projected = op.apply_t(q).transposed();  // d×cols
      const auto svd = svd_exact(projected);
      z = matmul(q, svd.u.columns(0, found));
      std::copy_n(svd.sigma.begin(), found, sigma.begin());
    }
    if (found < cfg.rank) {
      z = complete_orthonormal(z, cfg.rank - found);
      sigma.resize(cfg.rank, 0.0);
    }
    out.coefficients = op.apply_t(z).transposed();
    // Padded directions are orthogonal to range(M); their σ̂ stay exactly 0.
    out.subspace = RankRSubspace{std::move(z), std::move(sigma)};
    return out;
  }
  throw BkSvdBreakdown("bksvd: Krylov block rank-deficient after " +
                       std::to_string(kMaxRedraws) + " redraws (seed " +
                       std::to_string(cfg.seed) + ")");
}

}  // namespace

MatVecProvider MatVecProvider::from_dense(DenseMatrix m) {
  auto shared = std::make_shared<const DenseMatrix>(std::move(m));
  return {shared->rows(), shared->cols(),
          [shared](std::span<const double> v) { return matvec(*shared, v); },
          [shared](std::span<const double> v) { return matvec_t(*shared, v); }};
}

DenseMatrix MatVecProvider::to_dense() const {
  DenseMatrix out(rows, cols);
  std::vector<double> e(cols, 0.0);
  for (std::size_t j = 0; j < cols; ++j) {
    e[j] = 1.0;
    out.set_column(j, forward(e));
    e[j] = 0.0;
  }
  return out;
}

BkSvdResult bksvd_detailed(const MatVecProvider& m, const BkSvdConfig& cfg) {
  return run_bksvd(block_operator(m), cfg);
}

BkSvdResult bksvd_detailed(const DenseMatrix& m, const BkSvdConfig& cfg) {
  return run_bksvd(block_operator(m), cfg);
}

RankRSubspace bksvd(const MatVecProvider& m, const BkSvdConfig& cfg) {
  return bksvd_detailed(m, cfg).subspace;
}

RankRSubspace bksvd(const DenseMatrix& m, const BkSvdConfig& cfg) {
  return bksvd_detailed(m, cfg).subspace;
}

TailProjection tail_project(const DenseMatrix& l, const BkSvdConfig& cfg) {
  auto result = bksvd_detailed(l, cfg);
  return {matmul(result.subspace.basis, result.coefficients), std::move(result.subspace)};
}

TailProjection tail_project(const MatVecProvider& l, const BkSvdConfig& cfg) {
  auto result = bksvd_detailed(l, cfg);
  return {matmul(result.subspace.basis, result.coefficients), std::move(result.subspace)};
}

double projection_contraction_ratio(const DenseMatrix& l, const DenseMatrix& b,
                                    const BkSvdConfig& cfg) {
  const double denom = (l - b).frobenius_norm();
  if (denom == 0.0) return 0.0;
  const double num = (tail_project(l, cfg).projected - b).frobenius_norm();
  return (num * num) / (denom * denom);
}

double contraction_ratio_bound(std::size_t r_star, std::size_t r, double eps) {
  if (r <= r_star || eps >= 1.0) return std::numeric_limits<double>::infinity();
  return 1.0 + (2.0 / std::sqrt(1.0 - eps)) *
                   std::sqrt(static_cast<double>(r_star) / static_cast<double>(r - r_star));
}

}  // namespace maple
