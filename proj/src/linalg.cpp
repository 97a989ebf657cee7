#include "maple/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace maple {

namespace {

constexpr double kMachEps = 2.220446049250313e-16;
constexpr int kQlIterationCap = 60;

// Householder tridiagonalization of symmetric v (overwritten with the
// accumulated transformation). d gets the diagonal, e the subdiagonal in e[1..].
void tridiagonalize(std::vector<std::vector<double>>& v, std::vector<double>& d,
                    std::vector<double>& e) {
  const int n = static_cast<int>(d.size());
  for (int j = 0; j < n; ++j) d[j] = v[n - 1][j];

  for (int i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (int k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (int j = 0; j < i; ++j) {
        d[j] = v[i - 1][j];
        v[i][j] = 0.0;
        v[j][i] = 0.0;
      }
    } else {
      for (int k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (int j = 0; j < i; ++j) e[j] = 0.0;

      for (int j = 0; j < i; ++j) {
        f = d[j];
        v[j][i] = f;
        g = e[j] + v[j][j] * f;
        for (int k = j + 1; k <= i - 1; ++k) {
          g += v[k][j] * d[k];
          e[k] += v[k][j] * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (int j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (int j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (int j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (int k = j; k <= i - 1; ++k) v[k][j] -= (f * e[k] + g * d[k]);
        d[j] = v[i - 1][j];
        v[i][j] = 0.0;
      }
    }
    d[i] = h;
  }

  // Accumulate transformations.
  for (int i = 0; i < n - 1; ++i) {
    v[n - 1][i] = v[i][i];
    v[i][i] = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (int k = 0; k <= i; ++k) d[k] = v[k][i + 1] / h;
      for (int j = 0; j <= i; ++j) {
        double g = 0.0;
        for (int k = 0; k <= i; ++k) g += v[k][i + 1] * v[k][j];
        for (int k = 0; k <= i; ++k) v[k][j] -= g * d[k];
      }
    }
    for (int k = 0; k <= i; ++k) v[k][i + 1] = 0.0;
  }
  for (int j = 0; j < n; ++j) {
    d[j] = v[n - 1][j];
    v[n - 1][j] = 0.0;
  }
  v[n - 1][n - 1] = 1.0;
  e[0] = 0.0;
}

// Implicit-shift QL on the tridiagonal (d, e); rotations accumulated into v.
void tridiagonal_ql(std::vector<std::vector<double>>& v, std::vector<double>& d,
                    std::vector<double>& e) {
  const int n = static_cast<int>(d.size());
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  for (int l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    int m = l;
    while (m < n) {
      if (std::abs(e[m]) <= kMachEps * tst1) break;
      ++m;
    }
    if (m == n) m = n - 1;

    if (m > l) {
      int iter = 0;
      do {
        if (++iter > kQlIterationCap) {
          std::ostringstream msg;
          msg << "sym_eig: QL iteration did not converge for eigenvalue " << l
              << " (off-diagonal residual " << std::abs(e[l]) << ", threshold "
              << kMachEps * tst1 << ")";
          throw LinalgError(msg.str());
        }
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (int i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0;
        double c2 = c;
        double c3 = c;
        const double el1 = e[l + 1];
        double s = 0.0;
        double s2 = 0.0;
        for (int i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          for (int k = 0; k < n; ++k) {
            h = v[k][i + 1];
            v[k][i + 1] = s * v[k][i] + c * h;
            v[k][i] = c * v[k][i] - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > kMachEps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

// Orthogonalizes x against the first `count` columns of q (two passes) and
// returns the remaining norm.
double orthogonalize_against(const DenseMatrix& q, std::size_t count, std::vector<double>& x) {
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t j = 0; j < count; ++j) {
      double c = 0.0;
      for (std::size_t i = 0; i < q.rows(); ++i) c += q(i, j) * x[i];
      for (std::size_t i = 0; i < q.rows(); ++i) x[i] -= c * q(i, j);
    }
  }
  return norm2(x);
}

}  // namespace

QrResult qr_thin(const DenseMatrix& a) {
  const std::size_t p = a.rows();
  const std::size_t k = a.cols();
  if (k > p) throw std::invalid_argument("qr_thin: more columns than rows");

  DenseMatrix work = a;
  std::vector<std::vector<double>> reflectors(k);
  for (std::size_t j = 0; j < k; ++j) {
    double norm_sq = 0.0;
    for (std::size_t i = j; i < p; ++i) norm_sq += work(i, j) * work(i, j);
    const double norm = std::sqrt(norm_sq);
    if (norm == 0.0) continue;
    const double alpha = work(j, j) > 0 ? -norm : norm;
    std::vector<double> v(p - j);
    for (std::size_t i = j; i < p; ++i) v[i - j] = work(i, j);
    v[0] -= alpha;
    const double vnorm = norm2(v);
    if (vnorm == 0.0) continue;
    for (double& x : v) x /= vnorm;
    for (std::size_t c = j; c < k; ++c) {
      double s = 0.0;
      for (std::size_t i = j; i < p; ++i) s += v[i - j] * work(i, c);
      s *= 2.0;
      for (std::size_t i = j; i < p; ++i) work(i, c) -= s * v[i - j];
    }
    reflectors[j] = std::move(v);
  }

  QrResult out{DenseMatrix(p, k), DenseMatrix(k, k), false};
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) out.r(i, j) = work(i, j);

  for (std::size_t j = 0; j < k; ++j) out.q(j, j) = 1.0;
  for (std::size_t jj = k; jj-- > 0;) {
    const auto& v = reflectors[jj];
    if (v.empty()) continue;
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t i = jj; i < p; ++i) s += v[i - jj] * out.q(i, c);
      s *= 2.0;
      for (std::size_t i = jj; i < p; ++i) out.q(i, c) -= s * v[i - jj];
    }
  }

  for (std::size_t j = 0; j < k; ++j) {
    if (out.r(j, j) < 0) {
      for (std::size_t c = j; c < k; ++c) out.r(j, c) = -out.r(j, c);
      for (std::size_t i = 0; i < p; ++i) out.q(i, j) = -out.q(i, j);
    }
  }

  const double threshold = 1e-14 * a.frobenius_norm();
  for (std::size_t j = 0; j < k; ++j) {
    if (!(out.r(j, j) > threshold)) out.rank_deficient = true;
  }
  return out;
}

EigenDecomposition sym_eig(const DenseMatrix& a) {
  if (!a.is_square()) throw std::invalid_argument("sym_eig: matrix not square");
  const std::size_t n = a.rows();
  if (n == 0) return {{}, DenseMatrix()};
  const double norm = a.frobenius_norm();
  if (asymmetry(a) > 1e-10 * norm) {
    throw std::invalid_argument("sym_eig: input is not symmetric");
  }

  std::vector<std::vector<double>> v(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) v[i][j] = 0.5 * (a(i, j) + a(j, i));
  std::vector<double> d(n);
  std::vector<double> e(n);
  if (n == 1) {
    return {{v[0][0]}, DenseMatrix::identity(1)};
  }
  tridiagonalize(v, d, e);
  tridiagonal_ql(v, d, e);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return d[x] > d[y]; });

  EigenDecomposition out{std::vector<double>(n), DenseMatrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = d[order[c]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, c) = v[i][order[c]];
  }
  return out;
}

SingularValueDecomposition svd_exact(const DenseMatrix& a) {
  if (a.rows() < a.cols()) {
    auto t = svd_exact(a.transposed());
    return {std::move(t.v), std::move(t.sigma), std::move(t.u)};
  }
  const std::size_t p = a.rows();
  const std::size_t k = a.cols();
  if (k == 0) return {DenseMatrix(p, 0), {}, DenseMatrix(0, 0)};

  const auto eig = sym_eig(symmetrized(matmul_tn(a, a)));
  const DenseMatrix av = matmul(a, eig.vectors);

  // σ from ‖A v‖ rather than √λ: accurate for small singular values.
  std::vector<double> sigma(k);
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < p; ++i) s += av(i, j) * av(i, j);
    sigma[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SingularValueDecomposition out{DenseMatrix(p, k), std::vector<double>(k), DenseMatrix(k, k)};
  for (std::size_t c = 0; c < k; ++c) {
    out.sigma[c] = sigma[order[c]];
    for (std::size_t i = 0; i < k; ++i) out.v(i, c) = eig.vectors(i, order[c]);
  }

  // One-sided refinement: u_i = A v_i / σ_i, re-orthonormalized in order;
  // vanishing σ get a completed basis direction.
  const double cutoff = 1e-13 * out.sigma[0];
  std::size_t filled = 0;
  std::vector<std::size_t> missing;
  for (std::size_t c = 0; c < k; ++c) {
    if (out.sigma[c] <= cutoff || out.sigma[c] == 0.0) {
      missing.push_back(c);
      continue;
    }
    std::vector<double> u(p);
    for (std::size_t i = 0; i < p; ++i) u[i] = av(i, order[c]) / out.sigma[c];
    // Orthogonalize against all already-filled columns (their positions are < c).
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < c; ++j) {
        if (std::find(missing.begin(), missing.end(), j) != missing.end()) continue;
        double proj = 0.0;
        for (std::size_t i = 0; i < p; ++i) proj += out.u(i, j) * u[i];
        for (std::size_t i = 0; i < p; ++i) u[i] -= proj * out.u(i, j);
      }
    }
    const double nu = norm2(u);
    for (std::size_t i = 0; i < p; ++i) out.u(i, c) = u[i] / nu;
    ++filled;
  }
  if (!missing.empty()) {
    // Gather filled columns, complete, then scatter into the missing slots.
    DenseMatrix present(p, filled);
    std::size_t col = 0;
    for (std::size_t c = 0; c < k; ++c) {
      if (std::find(missing.begin(), missing.end(), c) != missing.end()) continue;
      for (std::size_t i = 0; i < p; ++i) present(i, col) = out.u(i, c);
      ++col;
    }
    const DenseMatrix completed = complete_orthonormal(present, missing.size());
    for (std::size_t m = 0; m < missing.size(); ++m)
      for (std::size_t i = 0; i < p; ++i) out.u(i, missing[m]) = completed(i, filled + m);
  }
  return out;
}

DenseMatrix hard_threshold_rank(const DenseMatrix& a, std::size_t r) {
  const std::size_t k = std::min(a.rows(), a.cols());
  if (r < 1 || r > k) throw std::invalid_argument("hard_threshold_rank: rank out of range");
  if (r == k) return a;
  const auto svd = svd_exact(a);
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t t = 0; t < r; ++t) {
    const double s = svd.sigma[t];
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double ui = s * svd.u(i, t);
      if (ui == 0.0) continue;
      auto row = out.row(i);
      for (std::size_t j = 0; j < a.cols(); ++j) row[j] += ui * svd.v(j, t);
    }
  }
  return out;
}

DenseMatrix psd_rank_projection(const DenseMatrix& a, std::size_t r) {
  const auto eig = sym_eig(a);
  const std::size_t n = a.rows();
  DenseMatrix out(n, n);
  for (std::size_t t = 0; t < std::min(r, n); ++t) {
    const double lambda = eig.values[t];
    if (!(lambda > 0.0)) break;
    for (std::size_t i = 0; i < n; ++i) {
      const double vi = lambda * eig.vectors(i, t);
      auto row = out.row(i);
      for (std::size_t j = 0; j < n; ++j) row[j] += vi * eig.vectors(j, t);
    }
  }
  return out;
}

std::optional<DenseMatrix> cholesky(const DenseMatrix& a) {
  if (!a.is_square()) throw std::invalid_argument("cholesky: matrix not square");
  const std::size_t n = a.rows();
  DenseMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) return std::nullopt;
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

double log_det_from_cholesky(const DenseMatrix& chol) {
  double s = 0.0;
  for (std::size_t i = 0; i < chol.rows(); ++i) s += std::log(chol(i, i));
  return 2.0 * s;
}

DenseMatrix inverse_from_cholesky(const DenseMatrix& chol) {
  const std::size_t n = chol.rows();
  // Invert the lower factor, then A⁻¹ = L⁻ᵀ L⁻¹.
  DenseMatrix linv(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    linv(j, j) = 1.0 / chol(j, j);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = j; k < i; ++k) s -= chol(i, k) * linv(k, j);
      linv(i, j) = s / chol(i, i);
    }
  }
  return matmul_tn(linv, linv);
}

std::optional<DenseMatrix> solve(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.is_square() || a.rows() != b.rows()) {
    throw std::invalid_argument("solve: dimension mismatch");
  }
  const std::size_t n = a.rows();
  DenseMatrix lu = a;
  DenseMatrix x = b;
  const double scale = std::max(a.max_abs(), 1e-300);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t i = col + 1; i < n; ++i)
      if (std::abs(lu(i, col)) > std::abs(lu(pivot, col))) pivot = i;
    if (std::abs(lu(pivot, col)) <= 1e3 * kMachEps * scale * static_cast<double>(n)) {
      return std::nullopt;
    }
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(col, j), lu(pivot, j));
      for (std::size_t j = 0; j < x.cols(); ++j) std::swap(x(col, j), x(pivot, j));
    }
    for (std::size_t i = col + 1; i < n; ++i) {
      const double factor = lu(i, col) / lu(col, col);
      if (factor == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) lu(i, j) -= factor * lu(col, j);
      for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) -= factor * x(col, j);
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      double s = x(i, j);
      for (std::size_t k = i + 1; k < n; ++k) s -= lu(i, k) * x(k, j);
      x(i, j) = s / lu(i, i);
    }
  }
  return x;
}

DenseMatrix complete_orthonormal(const DenseMatrix& basis, std::size_t extra) {
  const std::size_t p = basis.rows();
  const std::size_t k = basis.cols();
  if (k + extra > p) throw std::invalid_argument("complete_orthonormal: exceeds dimension");
  DenseMatrix out(p, k + extra);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < k; ++j) out(i, j) = basis(i, j);

  std::vector<bool> used(p, false);
  for (std::size_t added = 0; added < extra; ++added) {
    const std::size_t have = k + added;
    // Pick the standard basis vector with the largest residual.
    double best_norm = -1.0;
    std::vector<double> best;
    std::size_t best_index = 0;
    for (std::size_t e = 0; e < p; ++e) {
      if (used[e]) continue;
      std::vector<double> x(p, 0.0);
      x[e] = 1.0;
      const double r = orthogonalize_against(out, have, x);
      if (r > best_norm) {
        best_norm = r;
        best = std::move(x);
        best_index = e;
      }
      if (best_norm > 0.7) break;  // residual ≥ 1/√2 is well conditioned
    }
    used[best_index] = true;
    for (std::size_t i = 0; i < p; ++i) out(i, have) = best[i] / best_norm;
  }
  return out;
}

}  // namespace maple
