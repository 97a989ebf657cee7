#include "maple/solvers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "maple/format.hpp"
#include "maple/linalg.hpp"
#include "maple/rng.hpp"

namespace maple {

namespace {

constexpr std::size_t kMaxBackoffs = 10;

struct Iterate {
  DenseMatrix dense;
  std::optional<SymmetricLowRank> factors;
  DenseMatrix u;  // FGD factor
  double objective = 0.0;
};

using StepFn = std::function<Iterate(const Iterate& current, std::size_t iter, double eta)>;

std::uint64_t iteration_seed(std::uint64_t base, std::size_t iter) {
  return CounterRng(base).split(iter)();
}

double min_eig_of(const Iterate& it) {
  if (it.factors) return it.factors->min_eigenvalue();
  return sym_eig(symmetrized(it.dense)).values.back();
}

void validate(const LossModel& loss, const SolverConfig& cfg) {
  if (!(cfg.step_size > 0.0)) throw std::invalid_argument("solver: step_size must be > 0");
  if (cfg.max_iters < 1) throw std::invalid_argument("solver: max_iters must be >= 1");
  if (cfg.projected_rank < 1 || cfg.projected_rank > loss.dimension()) {
    throw std::invalid_argument("solver: projected_rank must lie in [1, p]");
  }
  if (cfg.final_truncate_rank &&
      (*cfg.final_truncate_rank < 1 || *cfg.final_truncate_rank > loss.dimension())) {
    throw std::invalid_argument("solver: final_truncate_rank must lie in [1, p]");
  }
}

TraceRecord make_record(std::size_t iter, double seconds, const Iterate& it,
                        const SolverConfig& cfg, const DenseMatrix* reference) {
  TraceRecord rec;
  rec.iter = iter;
  rec.seconds = cfg.record_time ? seconds : 0.0;
  rec.objective = it.objective;
  if (reference) rec.rel_error = relative_error(it.dense, *reference);
  if (cfg.monitor_min_eig) rec.min_eig = min_eig_of(it);
  return rec;
}

void finalize(SolverTrace& trace, const LossModel& loss, const SolverConfig& cfg,
              const DenseMatrix& last, const DenseMatrix* reference) {
  trace.estimate = last;
  if (cfg.final_truncate_rank) {
    trace.estimate = cfg.psd_project ? psd_rank_projection(last, *cfg.final_truncate_rank)
                                     : hard_threshold_rank(last, *cfg.final_truncate_rank);
  }
  try {
    trace.final_objective = loss.value(trace.estimate);
  } catch (const PmeDomainError& e) {
    trace.final_objective = std::numeric_limits<double>::quiet_NaN();
    trace.warnings.push_back(std::string("final estimate outside loss domain: ") + e.what());
  }
  if (reference) trace.final_rel_error = relative_error(trace.estimate, *reference);
}

SolverTrace run_loop(const std::string& name, const LossModel& loss, const SolverConfig& cfg,
                     const DenseMatrix* reference, Iterate current, double eta0,
                     const StepFn& step, const IterateObserver& observer) {
  using Clock = std::chrono::steady_clock;
  SolverTrace trace;
  trace.solver = name;
  double elapsed = 0.0;
  trace.records.push_back(make_record(0, 0.0, current, cfg, reference));

  const auto fail = [&](const std::string& why) {
    finalize(trace, loss, cfg, current.dense, nullptr);
    if (reference) trace.final_rel_error = relative_error(current.dense, *reference);
    throw SolverAbort(name + ": " + why, trace);
  };

  for (std::size_t t = 0; t < cfg.max_iters; ++t) {
    const auto start = Clock::now();
    double eta = eta0;
    std::size_t halvings = 0;
    std::optional<Iterate> next;
    while (!next) {
      try {
        next = step(current, t, eta);
      } catch (const PmeDomainError& e) {
        if (!cfg.backoff || halvings == kMaxBackoffs) {
          elapsed += std::chrono::duration<double>(Clock::now() - start).count();
          fail("iteration " + std::to_string(t + 1) + " left the loss domain (" + e.what() +
                ") after " + std::to_string(halvings) + " step halvings");
        }
        eta *= 0.5;
        ++halvings;
      }
    }
    elapsed += std::chrono::duration<double>(Clock::now() - start).count();
    if (halvings > 0) {
      trace.backoffs += halvings;
      trace.warnings.push_back("iteration " + std::to_string(t + 1) + ": step halved " +
                               std::to_string(halvings) + " time(s) to " + format_real(eta));
    }
    if (!std::isfinite(next->objective) || !next->dense.all_finite()) {
      fail("non-finite objective at iteration " + std::to_string(t + 1) +
            "; the step size is likely too large");
    }
    if (observer) observer(IterateView{t, current.dense, current.factors ? &*current.factors : nullptr, eta});

    const double change = (next->dense - current.dense).frobenius_norm() /
                          std::max(1.0, current.dense.frobenius_norm());
    current = *std::move(next);
    trace.records.push_back(make_record(t + 1, elapsed, current, cfg, reference));
    if (cfg.tolerance > 0.0 && change < cfg.tolerance) {
      trace.stopped_early = true;
      break;
    }
  }
  finalize(trace, loss, cfg, current.dense, reference);
  return trace;
}

BkSvdConfig projection_config(const SolverConfig& cfg, std::size_t iter) {
  BkSvdConfig b = cfg.bksvd;
  b.rank = cfg.projected_rank;
  b.seed = iteration_seed(cfg.bksvd.seed, iter);
  return b;
}

// Two-sided compression of a symmetric implicit M onto span(Z):
// ZZᵀMZZᵀ = (ZW)·diag(λ)·(ZW)ᵀ with ZᵀMZ = W diag(λ) Wᵀ.
SymmetricLowRank symmetric_factors(const DenseMatrix& z, const DenseMatrix& coefficients) {
  const auto eig = sym_eig(symmetrized(matmul(coefficients, z)));
  return {matmul(z, eig.vectors), eig.values};
}

Iterate dense_start(const LossModel& loss) {
  Iterate it;
  it.dense = DenseMatrix(loss.dimension(), loss.dimension());
  it.objective = loss.value(it.dense);
  return it;
}

}  // namespace

double relative_error(const DenseMatrix& estimate, const DenseMatrix& reference) {
  if (estimate.rows() != reference.rows() || estimate.cols() != reference.cols()) {
    throw std::invalid_argument("relative_error: dimension mismatch");
  }
  const double diff = (estimate - reference).frobenius_norm();
  const double base = reference.frobenius_norm();
  return base > 0.0 ? diff / base : diff;
}

void write_trace_csv(std::ostream& out, const SolverTrace& trace) {
  out << "iter,seconds,objective,rel_error,min_eig\n";
  for (const auto& r : trace.records) {
    out << r.iter << ',' << format_real(r.seconds) << ',' << format_real(r.objective) << ',';
    if (r.rel_error) out << format_real(*r.rel_error);
    out << ',';
    if (r.min_eig) out << format_real(*r.min_eig);
    out << '\n';
  }
}

std::string trace_csv(const SolverTrace& trace) {
  std::ostringstream os;
  write_trace_csv(os, trace);
  return os.str();
}

SolverTrace maple_run(const LossModel& loss, const SolverConfig& cfg, const DenseMatrix* reference,
                      const IterateObserver& observer) {
  validate(loss, cfg);
  Iterate start = dense_start(loss);

  if (loss.has_implicit_step()) {
    start.factors = SymmetricLowRank::zero(loss.dimension());
    const StepFn step = [&](const Iterate& cur, std::size_t t, double eta) {
      const MatVecProvider m = loss.implicit_step(*cur.factors, eta);
      const auto b = bksvd_detailed(m, projection_config(cfg, t));
      Iterate next;
      next.factors = symmetric_factors(b.subspace.basis, b.coefficients);
      next.objective = loss.value_factored(*next.factors);
      next.dense = next.factors->to_dense();
      return next;
    };
    return run_loop("maple", loss, cfg, reference, std::move(start), cfg.step_size, step,
                    observer);
  }

  const StepFn step = [&](const Iterate& cur, std::size_t t, double eta) {
    DenseMatrix m = cur.dense;
    m.axpy(-eta, loss.gradient(cur.dense));
    Iterate next;
    next.dense = tail_project(m, projection_config(cfg, t)).projected;
    next.objective = loss.value(next.dense);
    return next;
  };
  return run_loop("maple", loss, cfg, reference, std::move(start), cfg.step_size, step, observer);
}

SolverTrace svp_run(const LossModel& loss, const SolverConfig& cfg, const DenseMatrix* reference) {
  validate(loss, cfg);
  const StepFn step = [&](const Iterate& cur, std::size_t, double eta) {
    DenseMatrix m = cur.dense;
    m.axpy(-eta, loss.gradient(cur.dense));
    Iterate next;
    next.dense = cfg.psd_project ? psd_rank_projection(m, cfg.projected_rank)
                                 : hard_threshold_rank(m, cfg.projected_rank);
    next.objective = loss.value(next.dense);
    return next;
  };
  return run_loop("svp", loss, cfg, reference, dense_start(loss), cfg.step_size, step, {});
}

SolverTrace fgd_run(const LossModel& loss, const SolverConfig& cfg, const DenseMatrix* reference) {
  validate(loss, cfg);
  if (!(cfg.curvature_estimate > 0.0)) {
    throw std::invalid_argument("fgd: curvature_estimate must be > 0");
  }
  const std::size_t p = loss.dimension();
  const std::size_t r = cfg.projected_rank;

  // Spectral initialization from one tail projection of −∇F(0)/M_est.
  DenseMatrix m0 = loss.gradient(DenseMatrix(p, p));
  m0 *= -1.0 / cfg.curvature_estimate;
  const auto b = bksvd_detailed(m0, projection_config(cfg, 0));
  const SymmetricLowRank init = symmetric_factors(b.subspace.basis, b.coefficients);
  Iterate start;
  start.u = DenseMatrix(p, r);
  double top = 0.0;
  for (std::size_t k = 0; k < r; ++k) {
    const double lam = std::max(init.values[k], 0.0);
    top = std::max(top, lam);
    const double s = std::sqrt(lam);
    for (std::size_t i = 0; i < p; ++i) start.u(i, k) = s * init.basis(i, k);
  }
  start.dense = matmul_nt(start.u, start.u);
  start.objective = loss.value(start.dense);

  // Default factor step η = 1/(16(M‖X⁰‖₂ + ‖∇F(X⁰)Q⁰‖₂)) for U − η∇F·U, halved
  // here because the update uses ∇F + ∇Fᵀ.
  double eta_f = 0.0;
  if (cfg.fgd_step) {
    eta_f = *cfg.fgd_step;
  } else {
    const DenseMatrix g0 = loss.gradient(start.dense);
    const double g_norm = svd_exact(matmul(g0, init.basis.columns(0, r))).sigma.front();
    const double denom = cfg.curvature_estimate * top + g_norm;
    eta_f = 1.0 / (32.0 * (denom > 0.0 ? denom : cfg.curvature_estimate));
  }
  if (!(eta_f > 0.0)) throw std::invalid_argument("fgd: factor step must be > 0");

  const StepFn step = [&](const Iterate& cur, std::size_t, double eta) {
    const DenseMatrix g = loss.gradient(cur.dense);
    const DenseMatrix sym_g = g + g.transposed();
    Iterate next;
    next.u = cur.u;
    next.u.axpy(-eta, matmul(sym_g, cur.u));
    next.dense = matmul_nt(next.u, next.u);
    next.objective = loss.value(next.dense);
    return next;
  };
  return run_loop("fgd", loss, cfg, reference, std::move(start), eta_f, step, {});
}

TheoryReport theoretical_diagnostics(const SolverConfig& cfg, std::size_t r_star, double m_est,
                                     double big_m_est, double eps) {
  if (r_star < 1 || !(m_est > 0.0) || !(big_m_est >= m_est) || !(eps >= 0.0 && eps < 1.0)) {
    throw std::invalid_argument("theoretical_diagnostics: need r* >= 1, 0 < m <= M, 0 <= eps < 1");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double r = static_cast<double>(cfg.projected_rank);
  const double rs = static_cast<double>(r_star);
  const double m = m_est;
  const double big_m = big_m_est;
  const double eta = cfg.step_size;

  TheoryReport rep;
  rep.rank_inflation_required = cfg.projected_rank <= r_star;
  const double nu_sq = rep.rank_inflation_required
                           ? inf
                           : 1.0 + (2.0 / std::sqrt(1.0 - eps)) * std::sqrt(rs / (r - rs));
  rep.nu = std::sqrt(nu_sq);

  const double quad = 1.0 + big_m * big_m * eta * eta - 2.0 * m * eta;
  rep.rho = rep.rank_inflation_required ? inf : rep.nu * std::sqrt(std::max(quad, 0.0));

  const double alpha = r / rs;
  if (alpha > 1.0) {
    const double s = std::sqrt(alpha - 1.0);
    rep.alpha_prime = s / (std::sqrt(1.0 - eps) * s + 2.0);
  }
  rep.window_low = (1.0 - std::sqrt(rep.alpha_prime)) / big_m;
  rep.window_high = (1.0 + std::sqrt(rep.alpha_prime)) / m;

  // ρ < 1  ⇔  M²η² − 2mη + (1 − 1/ν²) < 0
  const double disc = m * m - big_m * big_m * (1.0 - 1.0 / nu_sq);
  rep.contraction_possible = disc > 0.0;
  if (rep.contraction_possible) {
    rep.contraction_low = (m - std::sqrt(disc)) / (big_m * big_m);
    rep.contraction_high = (m + std::sqrt(disc)) / (big_m * big_m);
  } else {
    rep.contraction_low = inf;
    rep.contraction_high = -inf;
  }
  rep.eta_opt = m / (big_m * big_m);
  const double ratio = m / big_m;
  rep.rho_min = rep.rank_inflation_required ? inf : rep.nu * std::sqrt(1.0 - ratio * ratio);

  const double cond4 = std::pow(big_m / m, 4.0);
  rep.implied_c1 = r * (1.0 - eps) / (cond4 * rs);
  rep.c1_condition_violated = rep.implied_c1 <= 2.0;

  if (rep.rank_inflation_required) {
    rep.notes.push_back("rank inflation required: r <= r* makes nu infinite");
  }
  if (rep.c1_condition_violated) {
    rep.notes.push_back("implied C1 = " + format_real(rep.implied_c1) +
                        " <= 2; the rank condition is not met for any C1 > 2");
  }
  if (!rep.contraction_possible) {
    rep.notes.push_back("no step size gives rho < 1 for these estimates");
  } else if (!(rep.rho < 1.0)) {
    rep.notes.push_back("step size " + format_real(eta) + " is outside the contraction window");
  }
  return rep;
}

}  // namespace maple
