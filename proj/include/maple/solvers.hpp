#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "maple/losses.hpp"
#include "maple/matrix.hpp"
#include "maple/rsvd.hpp"

namespace maple {

struct SolverConfig {
  std::size_t projected_rank = 1;  ///< r
  double step_size = 1.0;          ///< η
  std::size_t max_iters = 100;     ///< T
  double tolerance = 0.0;          ///< relative-change stop threshold, 0 disables
  /// Krylov depth, seed and oversampling; rank is taken from projected_rank.
  BkSvdConfig bksvd;
  bool psd_project = false;  ///< SVP: P_r⁺ instead of H_r; also used for the final truncation
  std::optional<std::size_t> final_truncate_rank;

  /// Halve η (at most 10 times per iteration) when the loss leaves its domain.
  bool backoff = true;
  /// Record λ_p(L^t) in the trace.
  bool monitor_min_eig = false;
  /// When false, every `seconds` field is 0 so traces are byte-reproducible.
  bool record_time = true;

  /// FGD only. Upper curvature estimate M_est; the spectral initialization
  /// uses −∇F(0)/M_est and the default factor step is
  /// 1/(32(M_est‖X⁰‖₂ + ‖∇F(X⁰)Q⁰‖₂)), X⁰ = U⁰U⁰ᵀ, Q⁰ = orthonormal basis of U⁰.
  double curvature_estimate = 1.0;
  std::optional<double> fgd_step;
};

struct TraceRecord {
  std::size_t iter = 0;
  double seconds = 0.0;
  double objective = 0.0;
  std::optional<double> rel_error;
  std::optional<double> min_eig;
};

struct SolverTrace {
  std::string solver;
  std::vector<TraceRecord> records;  ///< iteration 0 is the initial point
  DenseMatrix estimate;              ///< final iterate after optional truncation
  std::optional<double> final_rel_error;
  double final_objective = 0.0;
  std::size_t backoffs = 0;
  bool stopped_early = false;
  std::vector<std::string> warnings;
};

/// CSV with header iter,seconds,objective,rel_error,min_eig; reals at 17
/// significant digits, absent optional fields left empty.
void write_trace_csv(std::ostream& out, const SolverTrace& trace);
std::string trace_csv(const SolverTrace& trace);

/// Run stopped on a non-finite objective or exhausted step backoff.
class SolverAbort : public std::runtime_error {
 public:
  SolverAbort(const std::string& what, SolverTrace partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  [[nodiscard]] const SolverTrace& partial_trace() const noexcept { return partial_; }

 private:
  SolverTrace partial_;
};

/// Accepted iterate L^{t} together with the step that produced the next one.
struct IterateView {
  std::size_t iter;
  const DenseMatrix& dense;
  const SymmetricLowRank* factors;  ///< set on the factored (implicit) path
  double eta;
};
using IterateObserver = std::function<void(const IterateView&)>;

/// L^{t+1} = T(L^t − η∇F(L^t)) from L⁰ = 0 with T the BKSVD tail projection.
/// Losses with an implicit step (PME) keep L^t = ZΛZᵀ and never form the
/// gradient densely; the observer then sees the factors used for each step.
SolverTrace maple_run(const LossModel& loss, const SolverConfig& cfg,
                      const DenseMatrix* reference = nullptr,
                      const IterateObserver& observer = {});

/// Projected gradient with exact rank-r truncation (P_r⁺ when psd_project).
SolverTrace svp_run(const LossModel& loss, const SolverConfig& cfg,
                    const DenseMatrix* reference = nullptr);

/// Gradient descent on U with L = UUᵀ from a spectral initialization.
SolverTrace fgd_run(const LossModel& loss, const SolverConfig& cfg,
                    const DenseMatrix* reference = nullptr);

struct TheoryReport {
  double nu = 0.0;                  ///< ν; +∞ when r ≤ r*
  double rho = 0.0;                 ///< ρ at cfg.step_size
  double alpha_prime = 0.0;         ///< α′ with α = r/r*
  double window_low = 0.0;          ///< (1−√α′)/M
  double window_high = 0.0;         ///< (1+√α′)/m
  double contraction_low = 0.0;     ///< η range with ρ < 1, empty when low > high
  double contraction_high = 0.0;
  bool contraction_possible = false;
  double eta_opt = 0.0;             ///< m/M², minimizer of ρ
  double rho_min = 0.0;             ///< ν√(1 − (m/M)²)
  double implied_c1 = 0.0;          ///< r(1−ε)/((M/m)⁴r*)
  bool rank_inflation_required = false;  ///< r ≤ r*
  bool c1_condition_violated = false;    ///< implied C₁ ≤ 2
  std::vector<std::string> notes;
};

/// Advisory evaluation of the convergence conditions for given RSC/RSS
/// estimates. `eps` is the tail-projection accuracy assumed for T.
TheoryReport theoretical_diagnostics(const SolverConfig& cfg, std::size_t r_star, double m_est,
                                     double big_m_est, double eps = 0.5);

/// ‖A − B‖_F/‖B‖_F, or ‖A‖_F when B = 0.
double relative_error(const DenseMatrix& estimate, const DenseMatrix& reference);

}  // namespace maple
