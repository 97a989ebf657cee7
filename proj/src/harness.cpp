#include "maple/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "maple/format.hpp"
#include "maple/linalg.hpp"
#include "maple/matrix_io.hpp"
#include "maple/operators.hpp"
#include "maple/rng.hpp"
#include "maple/rsvd.hpp"

namespace maple::harness {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("'" + key + "' expects a finite number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "' expects true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string_view rest = v;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "p",        "r_star",      "r",           "n",          "kappa",        "noise_sigma",
      "link",     "solver",      "solvers",     "seed",       "seeds",        "step_size",
      "max_iters", "q",          "oversample",  "tolerance",  "final_rank",   "success_threshold",
      "lambda",   "signal_scale", "s_bar",      "trials",     "eps",          "input",
      "output",   "out",         "record_time", "threads"};
  return keys;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ConfigMap parse_config(std::string_view text) {
  ConfigMap out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second) {
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

ConfigMap load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

ExperimentConfig resolve_config(std::string_view command, const ConfigMap& values) {
  if (std::find(std::begin(kCommands), std::end(kCommands), command) == std::end(kCommands)) {
    throw ConfigError("unknown command '" + std::string(command) + "'");
  }
  for (const auto& [key, value] : values) {
    if (!known_keys().contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }

  ExperimentConfig c;
  c.command = std::string(command);
  c.solvers = {"maple"};
  c.seeds = {1};
  if (command == "lemma-check") {
    c.p = 64, c.r_star = 4, c.r = 16, c.q = 2, c.seeds = {0};
  } else if (command == "nlarm") {
    c.p = 128, c.r_star = 5, c.r = 5, c.kappa = 1.1, c.link = "2x-plus-sin";
    c.seeds = {1, 2, 3}, c.max_iters = 200;
  } else if (command == "lpca") {
    c.p = 200, c.r_star = 5, c.r = 5, c.kappa = 1.4, c.seeds = {1, 2, 3};
  } else if (command == "pme") {
    c.p = 100, c.r_star = 5, c.r = 5, c.kappa = 2.0;
  } else {  // matrix-recover
    c.r = 30, c.link = "tanh-sigmoid", c.max_iters = 200;
  }

  const auto get = [&](const std::string& key) -> const std::string* {
    const auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second;
  };
  if (auto v = get("p")) c.p = parse_size("p", *v);
  if (auto v = get("r_star")) c.r_star = parse_size("r_star", *v);
  if (auto v = get("r")) c.r = parse_size("r", *v);
  if (auto v = get("n")) c.n = parse_size("n", *v);
  if (auto v = get("kappa")) c.kappa = parse_real("kappa", *v);
  if (auto v = get("noise_sigma")) c.noise_sigma = parse_real("noise_sigma", *v);
  if (auto v = get("link")) c.link = *v;
  if (get("solver") && get("solvers")) throw ConfigError("give either 'solver' or 'solvers'");
  if (auto v = get("solver")) c.solvers = split_list(*v);
  if (auto v = get("solvers")) c.solvers = split_list(*v);
  if (get("seed") && get("seeds")) throw ConfigError("give either 'seed' or 'seeds'");
  for (const char* key : {"seed", "seeds"}) {
    if (auto v = get(key)) {
      c.seeds.clear();
      for (const auto& s : split_list(*v)) c.seeds.push_back(parse_size(key, s));
    }
  }
  if (auto v = get("step_size")) c.step_size = parse_real("step_size", *v);
  if (auto v = get("max_iters")) c.max_iters = parse_size("max_iters", *v);
  if (auto v = get("q")) c.q = parse_size("q", *v);
  if (auto v = get("oversample")) c.oversample = parse_size("oversample", *v);
  if (auto v = get("tolerance")) c.tolerance = parse_real("tolerance", *v);
  if (auto v = get("final_rank")) c.final_rank = parse_size("final_rank", *v);
  if (auto v = get("success_threshold")) c.success_threshold = parse_real("success_threshold", *v);
  if (auto v = get("lambda")) c.lambda = parse_real("lambda", *v);
  if (auto v = get("s_bar")) c.s_bar = parse_real("s_bar", *v);
  if (auto v = get("trials")) c.trials = parse_size("trials", *v);
  if (auto v = get("eps")) c.eps = parse_real("eps", *v);
  if (auto v = get("input")) c.input = *v;
  if (auto v = get("out")) c.out_dir = *v;
  if (auto v = get("output")) c.output = *v;
  if (auto v = get("record_time")) c.record_time = parse_bool("record_time", *v);
  if (auto v = get("threads")) c.threads = parse_size("threads", *v);

  // Dependent defaults.
  if (auto v = get("signal_scale")) c.signal_scale = parse_real("signal_scale", *v);
  if (!get("n")) {
    if (command == "nlarm") c.n = 4 * c.p * c.r;
    if (command == "pme") c.n = 400 * c.p;
  }
  if (command == "matrix-recover" && !get("r_star")) c.r_star = c.r;
  if (c.output.empty()) c.output = c.out_dir / "estimate.bin";

  // Validation.
  const auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(c.r >= 1, "'r' must be >= 1");
  require(c.q >= 1, "'q' must be >= 1");
  require(c.max_iters >= 1, "'max_iters' must be >= 1");
  require(c.threads >= 1, "'threads' must be >= 1");
  require(!c.seeds.empty(), "at least one seed is required");
  require(c.kappa >= 1.0, "'kappa' must be >= 1");
  require(c.noise_sigma >= 0.0, "'noise_sigma' must be >= 0");
  require(c.tolerance >= 0.0, "'tolerance' must be >= 0");
  require(c.lambda >= 0.0, "'lambda' must be >= 0");
  require(c.s_bar > 0.0, "'s_bar' must be > 0");
  require(c.signal_scale > 0.0, "'signal_scale' must be > 0");
  require(c.success_threshold > 0.0, "'success_threshold' must be > 0");
  require(c.eps >= 0.0 && c.eps < 1.0, "'eps' must lie in [0, 1)");
  require(c.trials >= 1, "'trials' must be >= 1");
  require(!c.step_size || *c.step_size > 0.0, "'step_size' must be > 0");
  for (const auto& s : c.solvers) {
    require(s == "maple" || s == "svp" || s == "fgd", "unknown solver '" + s + "'");
  }
  require(!c.solvers.empty(), "at least one solver is required");
  if (!c.link.empty()) {
    try {
      (void)LinkFunction::by_name(c.link);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (command == "matrix-recover") {
    require(!c.input.empty(), "matrix-recover needs 'input'");
  } else {
    require(c.p >= 1, "'p' must be >= 1");
    require(c.r_star >= 1 && c.r_star <= c.p, "'r_star' must lie in [1, p]");
    require(c.r <= c.p, "'r' must not exceed p");
    require(!c.final_rank || (*c.final_rank >= 1 && *c.final_rank <= c.p),
            "'final_rank' must lie in [1, p]");
  }
  if (command == "nlarm") {
    require(c.n >= 1 && c.n <= next_power_of_two(c.p * c.p),
            "'n' must lie in [1, padded dimension " +
                std::to_string(next_power_of_two(c.p * c.p)) + "]");
  }
  if (command == "pme") require(c.n >= 1, "'n' must be >= 1");
  return c;
}

// ------------------------------------------------------------ lemma study

double lemma_trial(std::size_t p, std::size_t r_star, std::size_t r, std::size_t q,
                   std::uint64_t seed) {
  const CounterRng root(seed);
  CounterRng rng = root.split(0);
  const DenseMatrix b = matmul_nt(gaussian_matrix(p, r_star, rng), gaussian_matrix(p, r_star, rng));

  const auto kind = rng.below(3);
  const double size = std::pow(10.0, -3.0 + 4.0 * rng.uniform()) * b.frobenius_norm();
  DenseMatrix e(p, p);
  if (kind != 1) e += gaussian_matrix(p, p, rng);
  if (kind != 0) {
    const std::size_t k = 1 + rng.below(r);
    DenseMatrix lr = matmul_nt(gaussian_matrix(p, k, rng), gaussian_matrix(p, k, rng));
    lr *= static_cast<double>(p) / std::sqrt(static_cast<double>(k));
    e += lr;
  }
  e *= size / e.frobenius_norm();

  BkSvdConfig cfg;
  cfg.rank = r;
  cfg.krylov_iters = q;
  cfg.seed = root.split(1)();
  return projection_contraction_ratio(b + e, b, cfg);
}

LemmaReport run_lemma_study(const ExperimentConfig& cfg) {
  LemmaReport rep;
  rep.bound = contraction_ratio_bound(cfg.r_star, cfg.r, cfg.eps);
  const CounterRng root(cfg.seeds.front());
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    rep.ratios.push_back(lemma_trial(cfg.p, cfg.r_star, cfg.r, cfg.q, root.split(t)()));
  }
  rep.max = *std::max_element(rep.ratios.begin(), rep.ratios.end());
  rep.median = median_of(rep.ratios);
  return rep;
}

// ------------------------------------------------------------ experiment runs

SolverConfig solver_config(const ExperimentConfig& cfg, const LossModel& loss,
                           std::uint64_t seed) {
  SolverConfig s;
  s.projected_rank = cfg.r;
  s.max_iters = cfg.max_iters;
  s.tolerance = cfg.tolerance;
  s.bksvd.krylov_iters = cfg.q;
  s.bksvd.oversample = cfg.oversample;
  s.bksvd.seed = CounterRng(seed).split(7)();
  s.final_truncate_rank = cfg.final_rank;
  s.record_time = cfg.record_time;

  double step = 1.0;
  if (const auto* nl = dynamic_cast<const NlarmLoss*>(&loss)) {
    step = 0.5 / nl->link().mu2;
    s.curvature_estimate = nl->link().mu2;
  } else if (const auto* lp = dynamic_cast<const LogisticPcaLoss*>(&loss)) {
    s.curvature_estimate = 0.25 + 2.0 * lp->lambda();
    step = 4.0 / static_cast<double>(lp->dimension());
  } else if (const auto* pm = dynamic_cast<const PmeLoss*>(&loss)) {
    const double s_min = *std::min_element(pm->s_bar().begin(), pm->s_bar().end());
    step = 0.5 * s_min * s_min;
    s.curvature_estimate = 1.0 / (s_min * s_min);
    s.monitor_min_eig = true;
  }
  s.step_size = cfg.step_size.value_or(step);
  return s;
}

RunSummary run_solver(const std::string& solver, const LossModel& loss, const SolverConfig& scfg,
                      const DenseMatrix* reference, double success_threshold,
                      std::uint64_t seed) {
  RunSummary out;
  out.solver = solver;
  out.seed = seed;
  try {
    if (solver == "maple") {
      out.trace = maple_run(loss, scfg, reference);
    } else if (solver == "svp") {
      out.trace = svp_run(loss, scfg, reference);
    } else if (solver == "fgd") {
      out.trace = fgd_run(loss, scfg, reference);
    } else {
      throw std::invalid_argument("unknown solver '" + solver + "'");
    }
  } catch (const SolverAbort& e) {
    out.status = std::string("aborted: ") + e.what();
    out.trace = e.partial_trace();
  }
  out.rel_error = out.trace.final_rel_error;
  out.objective = out.trace.final_objective;
  if (const auto* lp = dynamic_cast<const LogisticPcaLoss*>(&loss)) {
    out.objective = lp->logistic_loss(out.trace.estimate);
  }
  out.seconds = out.trace.records.empty() ? 0.0 : out.trace.records.back().seconds;
  out.iterations = out.trace.records.empty() ? 0 : out.trace.records.size() - 1;
  out.success = out.status == "ok" && out.rel_error && *out.rel_error < success_threshold;
  return out;
}

NlarmProblem make_nlarm_problem(const ExperimentConfig& cfg, std::uint64_t seed) {
  GroundTruth gt = gen_lowrank(cfg.p, cfg.r_star, cfg.kappa, seed);
  gt.l_star *= cfg.signal_scale;
  const LinkFunction link = LinkFunction::by_name(cfg.link);
  auto op = MeasurementOperator::fast_hadamard(cfg.p, cfg.n, CounterRng(seed).split(5)());
  auto y = gen_nlarm(gt, op, link, cfg.noise_sigma, seed);
  return {std::move(gt), NlarmLoss(std::move(op), std::move(y), link)};
}

LpcaProblem make_lpca_problem(const ExperimentConfig& cfg, std::uint64_t seed) {
  GroundTruth gt = gen_lowrank(cfg.p, cfg.r_star, cfg.kappa, seed);
  gt.l_star *= cfg.signal_scale;
  DenseMatrix y = gen_lpca(gt, seed);
  return {std::move(gt), LogisticPcaLoss(std::move(y), cfg.lambda)};
}

PmeInstance make_pme_problem(const ExperimentConfig& cfg, std::uint64_t seed) {
  PmeGenOptions opt;
  opt.s_bar.assign(cfg.p, cfg.s_bar);
  opt.kappa = cfg.kappa;
  return gen_pme(cfg.p, cfg.r_star, cfg.n, opt, seed);
}

namespace {

struct TrialResult {
  std::vector<RunSummary> runs;
  std::string log;
  std::string error;
};

void write_trace_file(const std::filesystem::path& dir, const RunSummary& run) {
  std::ofstream f(dir / ("trace_" + run.solver + "_seed" + std::to_string(run.seed) + ".csv"));
  if (!f) throw std::runtime_error("cannot write trace file in " + dir.string());
  write_trace_csv(f, run.trace);
}

TrialResult run_trial(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrialResult res;
  std::ostringstream log;
  try {
    std::unique_ptr<LossModel> loss;
    GroundTruth truth;
    InstanceMetadata meta{seed, cfg.p, cfg.r_star, cfg.kappa, cfg.n, cfg.noise_sigma};
    if (cfg.command == "nlarm") {
      auto prob = make_nlarm_problem(cfg, seed);
      truth = std::move(prob.truth);
      loss = std::make_unique<NlarmLoss>(std::move(prob.loss));
    } else if (cfg.command == "lpca") {
      auto prob = make_lpca_problem(cfg, seed);
      truth = std::move(prob.truth);
      loss = std::make_unique<LogisticPcaLoss>(std::move(prob.loss));
      meta.n = cfg.p * cfg.p;
    } else {
      auto inst = make_pme_problem(cfg, seed);
      truth = inst.truth;
      loss = std::make_unique<PmeLoss>(inst.loss());
      log << "seed " << seed << ": NLL at L* = " << format_real(loss->value(truth.l_star)) << '\n';
    }
    write_metadata_json(cfg.out_dir / ("instance_seed" + std::to_string(seed) + ".json"), meta);

    for (const auto& solver : cfg.solvers) {
      SolverConfig scfg = solver_config(cfg, *loss, seed);
      if (cfg.command == "pme" && solver == "svp") scfg.psd_project = true;
      auto run = run_solver(solver, *loss, scfg, &truth.l_star, cfg.success_threshold, seed);
      write_trace_file(cfg.out_dir, run);
      log << "seed " << seed << " " << solver << ": " << run.status << ", rel_error "
          << (run.rel_error ? format_real(*run.rel_error) : "n/a") << ", objective "
          << format_real(run.objective) << '\n';
      for (const auto& w : run.trace.warnings) log << "  warning: " << w << '\n';
      res.runs.push_back(std::move(run));
    }
  } catch (const std::exception& e) {
    res.error = "seed " + std::to_string(seed) + ": " + e.what();
  }
  res.log = log.str();
  return res;
}

void check_iteration_cost(const ExperimentConfig& cfg, const std::vector<RunSummary>& runs,
                          std::ostream& log) {
  if (cfg.p < 256 || cfg.r * 16 > cfg.p || !cfg.record_time) return;
  const auto per_iter = [&](const std::string& solver) {
    std::vector<double> v;
    for (const auto& r : runs)
      if (r.solver == solver && r.iterations > 0) v.push_back(r.seconds / r.iterations);
    return median_of(v);
  };
  const double maple = per_iter("maple");
  const double svp = per_iter("svp");
  if (std::isfinite(maple) && std::isfinite(svp) && maple >= svp) {
    log << "warning: MAPLE per-iteration time " << format_real(maple)
        << " s is not below SVP's " << format_real(svp) << " s\n";
  }
}

}  // namespace

std::vector<RunSummary> run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  std::filesystem::create_directories(cfg.out_dir);
  std::vector<TrialResult> results(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
      results[i] = run_trial(cfg, cfg.seeds[i]);
    }
  };
  const std::size_t workers = std::min(cfg.threads, cfg.seeds.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<RunSummary> runs;
  for (auto& r : results) {
    log << r.log;
    if (!r.error.empty()) throw std::runtime_error(r.error);
    for (auto& run : r.runs) runs.push_back(std::move(run));
  }
  check_iteration_cost(cfg, runs, log);
  return runs;
}

void write_summary_csv(std::ostream& out, const std::vector<RunSummary>& runs) {
  out << "solver,seed,status,rel_error,objective,seconds,iterations,success\n";
  for (const auto& r : runs) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << r.solver << ',' << r.seed << ',' << status << ','
        << (r.rel_error ? format_real(*r.rel_error) : "") << ',' << format_real(r.objective)
        << ',' << format_real(r.seconds) << ',' << r.iterations << ','
        << (r.success ? 1 : 0) << '\n';
  }
}

void write_summary_stats_csv(std::ostream& out, const std::vector<RunSummary>& runs) {
  out << "solver,metric,median,mean,count\n";
  std::vector<std::string> order;
  for (const auto& r : runs)
    if (std::find(order.begin(), order.end(), r.solver) == order.end()) order.push_back(r.solver);
  for (const auto& solver : order) {
    std::vector<double> err, obj, secs, succ;
    for (const auto& r : runs) {
      if (r.solver != solver || r.status != "ok") continue;
      if (r.rel_error) err.push_back(*r.rel_error);
      obj.push_back(r.objective);
      secs.push_back(r.seconds);
      succ.push_back(r.success ? 1.0 : 0.0);
    }
    const auto row = [&](const char* metric, const std::vector<double>& v) {
      out << solver << ',' << metric << ',' << format_real(median_of(v)) << ','
          << format_real(mean_of(v)) << ',' << v.size() << '\n';
    };
    row("rel_error", err);
    row("objective", obj);
    row("seconds", secs);
    row("success", succ);
  }
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

void write_run_json(const ExperimentConfig& cfg, const std::vector<RunSummary>& runs) {
  nlohmann::ordered_json j;
  j["command"] = cfg.command;
  j["p"] = cfg.p;
  j["r_star"] = cfg.r_star;
  j["r"] = cfg.r;
  j["n"] = cfg.n;
  j["kappa"] = cfg.kappa;
  j["noise_sigma"] = cfg.noise_sigma;
  j["link"] = cfg.link;
  j["solvers"] = cfg.solvers;
  j["seeds"] = cfg.seeds;
  j["max_iters"] = cfg.max_iters;
  j["q"] = cfg.q;
  j["runs"] = runs.size();
  write_text(cfg.out_dir / "run.json", j.dump(2) + "\n");
}

int finish_experiment(const ExperimentConfig& cfg, const std::vector<RunSummary>& runs,
                      std::ostream& out) {
  std::ostringstream summary;
  std::ostringstream stats;
  write_summary_csv(summary, runs);
  write_summary_stats_csv(stats, runs);
  write_text(cfg.out_dir / "summary.csv", summary.str());
  write_text(cfg.out_dir / "summary_stats.csv", stats.str());
  write_run_json(cfg, runs);
  out << stats.str();
  const bool aborted = std::any_of(runs.begin(), runs.end(),
                                   [](const RunSummary& r) { return r.status != "ok"; });
  return aborted ? 1 : 0;
}

int cmd_lemma_check(const ExperimentConfig& cfg, std::ostream& out) {
  const LemmaReport rep = run_lemma_study(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  std::ostringstream csv;
  csv << "trial,ratio\n";
  for (std::size_t t = 0; t < rep.ratios.size(); ++t) {
    csv << t << ',' << format_real(rep.ratios[t]) << '\n';
  }
  write_text(cfg.out_dir / "lemma_ratios.csv", csv.str());
  out << "trials " << rep.ratios.size() << ", bound " << format_real(rep.bound) << ", max "
      << format_real(rep.max) << ", median " << format_real(rep.median) << '\n';
  return rep.all_within_bound() ? 0 : 1;
}

int cmd_matrix_recover(const ExperimentConfig& base, std::ostream& out) {
  ExperimentConfig cfg = base;
  const DenseMatrix truth_matrix = read_matrix(cfg.input);
  if (!truth_matrix.is_square()) throw ConfigError("input matrix must be square");
  cfg.p = truth_matrix.rows();
  if (cfg.r > cfg.p) throw ConfigError("'r' must not exceed the matrix side");
  const std::size_t padded = next_power_of_two(cfg.p * cfg.p);
  if (cfg.n == 0) cfg.n = std::min(padded, 4 * cfg.p * cfg.r);
  if (cfg.n > padded) throw ConfigError("'n' exceeds padded dimension " + std::to_string(padded));
  std::filesystem::create_directories(cfg.out_dir);

  const std::uint64_t seed = cfg.seeds.front();
  const GroundTruth gt{truth_matrix, cfg.r_star, 0.0, seed};
  const LinkFunction link = LinkFunction::by_name(cfg.link);
  auto op = MeasurementOperator::fast_hadamard(cfg.p, cfg.n, CounterRng(seed).split(5)());
  auto y = gen_nlarm(gt, op, link, cfg.noise_sigma, seed);
  const NlarmLoss loss(std::move(op), std::move(y), link);

  std::vector<RunSummary> runs;
  for (const auto& solver : cfg.solvers) {
    auto run = run_solver(solver, loss, solver_config(cfg, loss, seed), &gt.l_star,
                          cfg.success_threshold, seed);
    write_trace_file(cfg.out_dir, run);
    if (runs.empty()) write_matrix(cfg.output, run.trace.estimate);
    out << solver << ": " << run.status << ", rel_error "
        << (run.rel_error ? format_real(*run.rel_error) : "n/a") << '\n';
    runs.push_back(std::move(run));
  }
  return finish_experiment(cfg, runs, out);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-rank estimation experiments with approximate tail projections"};
  app.allow_extras();
  std::string command;
  std::string config_path;
  std::string out_dir;
  app.add_option("command", command, "lemma-check | nlarm | lpca | pme | matrix-recover")
      ->required();
  app.add_option("--config", config_path, "flat key=value config file");
  app.add_option("--out", out_dir, "output directory");
  app.footer("Any further --key value pair overrides the config key of the same name.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return 2;
  }

  try {
    ConfigMap values;
    if (!config_path.empty()) values = load_config(config_path);
    const auto extras = app.remaining();
    for (std::size_t i = 0; i < extras.size(); ++i) {
      std::string arg = extras[i];
      if (arg.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + arg + "'");
      arg = arg.substr(2);
      std::string value;
      if (const auto eq = arg.find('='); eq != std::string::npos) {
        value = arg.substr(eq + 1);
        arg = arg.substr(0, eq);
      } else {
        if (i + 1 >= extras.size()) throw ConfigError("missing value for --" + arg);
        value = extras[++i];
      }
      std::replace(arg.begin(), arg.end(), '-', '_');
      values[arg] = value;
    }
    if (!out_dir.empty()) values["out"] = out_dir;

    const ExperimentConfig cfg = resolve_config(command, values);
    if (cfg.command == "lemma-check") return cmd_lemma_check(cfg, out);
    if (cfg.command == "matrix-recover") return cmd_matrix_recover(cfg, out);
    return finish_experiment(cfg, run_experiment(cfg, err), out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const MatrixIoError& e) {
    err << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace maple::harness
