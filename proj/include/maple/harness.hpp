#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "maple/losses.hpp"
#include "maple/solvers.hpp"
#include "maple/synth.hpp"

namespace maple::harness {

/// Malformed config text, unknown key or out-of-range value. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ConfigMap = std::map<std::string, std::string>;

/// Flat `key = value` lines; `#` starts a comment; blank lines ignored.
ConfigMap parse_config(std::string_view text);
ConfigMap load_config(const std::filesystem::path& path);

struct ExperimentConfig {
  std::string command;
  std::size_t p = 0;
  std::size_t r_star = 0;
  std::size_t r = 0;
  std::size_t n = 0;
  double kappa = 1.0;
  double noise_sigma = 0.0;
  std::string link;
  std::vector<std::string> solvers;
  std::vector<std::uint64_t> seeds;
  std::optional<double> step_size;  ///< unset: per-command default
  std::size_t max_iters = 100;
  std::size_t q = 2;
  std::size_t oversample = 0;
  double tolerance = 0.0;
  std::optional<std::size_t> final_rank;
  double success_threshold = 1e-3;
  double lambda = 1e-2;        ///< logistic PCA ridge weight
  double signal_scale = 1.0;   ///< multiplies L*
  double s_bar = 2.0;          ///< PME diagonal value
  std::size_t trials = 200;    ///< lemma-check
  double eps = 0.5;            ///< lemma-check: assumed tail accuracy
  std::filesystem::path input;   ///< matrix-recover
  std::filesystem::path output;  ///< matrix-recover estimate file
  std::filesystem::path out_dir = "maple_out";
  bool record_time = true;
  std::size_t threads = 1;
};

inline constexpr std::string_view kCommands[] = {"lemma-check", "nlarm", "lpca", "pme",
                                                 "matrix-recover"};

/// Applies per-command defaults, then the given values. Unknown keys,
/// unparsable numbers and invalid ranges raise ConfigError.
ExperimentConfig resolve_config(std::string_view command, const ConfigMap& values);

// ------------------------------------------------------------ lemma study

struct LemmaTrial {
  double ratio = 0.0;
};

/// One random trial: B = rank-r* product of Gaussian factors, L = B + E with
/// E a seeded mix of low-rank and dense Gaussian perturbations of random size.
double lemma_trial(std::size_t p, std::size_t r_star, std::size_t r, std::size_t q,
                   std::uint64_t seed);

struct LemmaReport {
  std::vector<double> ratios;
  double bound = 0.0;
  double max = 0.0;
  double median = 0.0;
  [[nodiscard]] bool all_within_bound() const { return max <= bound; }
};

LemmaReport run_lemma_study(const ExperimentConfig& cfg);

// ------------------------------------------------------------ experiment runs

struct RunSummary {
  std::string solver;
  std::uint64_t seed = 0;
  std::string status = "ok";  ///< "ok" or "aborted: <reason>"
  std::optional<double> rel_error;
  double objective = 0.0;
  double seconds = 0.0;
  std::size_t iterations = 0;
  bool success = false;
  SolverTrace trace;
};

/// Solver settings for one experiment, including the per-application step default.
SolverConfig solver_config(const ExperimentConfig& cfg, const LossModel& loss,
                           std::uint64_t seed);

/// Runs "maple", "svp" or "fgd"; aborts are captured in the summary status.
RunSummary run_solver(const std::string& solver, const LossModel& loss, const SolverConfig& scfg,
                      const DenseMatrix* reference, double success_threshold,
                      std::uint64_t seed);

struct NlarmProblem {
  GroundTruth truth;
  NlarmLoss loss;
};
NlarmProblem make_nlarm_problem(const ExperimentConfig& cfg, std::uint64_t seed);

struct LpcaProblem {
  GroundTruth truth;
  LogisticPcaLoss loss;
};
LpcaProblem make_lpca_problem(const ExperimentConfig& cfg, std::uint64_t seed);

PmeInstance make_pme_problem(const ExperimentConfig& cfg, std::uint64_t seed);

/// Per-seed runs of every configured solver, in seed-major order.
std::vector<RunSummary> run_experiment(const ExperimentConfig& cfg, std::ostream& log);

/// summary.csv: solver,seed,status,rel_error,objective,seconds,iterations,success
void write_summary_csv(std::ostream& out, const std::vector<RunSummary>& runs);
/// summary_stats.csv: solver,metric,median,mean,count over successful (non-aborted) runs.
void write_summary_stats_csv(std::ostream& out, const std::vector<RunSummary>& runs);

/// Full command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace maple::harness
