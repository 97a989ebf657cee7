#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "maple/format.hpp"
#include "maple/harness.hpp"
#include "maple/matrix_io.hpp"
#include "support.hpp"

using namespace maple;
using namespace maple::harness;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "maple_tool");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("maple_harness_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config text") {
  const auto m = parse_config("# header\n p = 12 \n\nseeds = 1, 2 # trailing\nlink=identity\n");
  CHECK(m.size() == 3);
  CHECK(m.at("p") == "12");
  CHECK(m.at("seeds") == "1, 2");
  CHECK(m.at("link") == "identity");
  CHECK_THROWS_AS((void)parse_config("p = 1\np = 2\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config("just words\n"), ConfigError);
  CHECK_THROWS_AS((void)parse_config(" = 4\n"), ConfigError);
  CHECK_THROWS_AS((void)load_config("/nonexistent/maple.cfg"), ConfigError);
}

TEST_CASE("per-command defaults") {
  const auto nl = resolve_config("nlarm", {});
  CHECK(nl.p == 128);
  CHECK(nl.r_star == 5);
  CHECK(nl.r == 5);
  CHECK(nl.n == 4 * 128 * 5);
  CHECK(nl.kappa == 1.1);
  CHECK(nl.link == "2x-plus-sin");
  CHECK(nl.max_iters == 200);

  const auto pme = resolve_config("pme", {});
  CHECK(pme.p == 100);
  CHECK(pme.n == 40000);
  CHECK(pme.kappa == 2.0);

  const auto lp = resolve_config("lpca", {});
  CHECK(lp.p == 200);
  CHECK(lp.kappa == 1.4);

  const auto lemma = resolve_config("lemma-check", {});
  CHECK(lemma.p == 64);
  CHECK(lemma.r_star == 4);
  CHECK(lemma.r == 16);
  CHECK(lemma.q == 2);
  CHECK(lemma.trials == 200);

  const auto derived = resolve_config("nlarm", {{"p", "32"}, {"r", "3"}});
  CHECK(derived.n == 4 * 32 * 3);
  const auto seeds = resolve_config("nlarm", {{"seeds", "4,5,6,7"}, {"solvers", "maple, svp"}});
  CHECK(seeds.seeds == std::vector<std::uint64_t>{4, 5, 6, 7});
  CHECK(seeds.solvers == std::vector<std::string>{"maple", "svp"});
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS((void)resolve_config("fit", {}), ConfigError);
  CHECK_THROWS_AS((void)resolve_config("nlarm", {{"colour", "red"}}), ConfigError);
  CHECK_THROWS_AS((void)resolve_config("nlarm", {{"p", "ten"}}), ConfigError);
  CHECK_THROWS_AS((void)resolve_config("nlarm", {{"p", "-3"}}), ConfigError);
  CHECK_THROWS_AS((void)resolve_config("nlarm", {{"kappa", "0.5"}}), ConfigError);
  CHECK_THROWS_AS((void)resolve_config("nlarm", {{"r", "0"}}), ConfigError);
  CHECK_THROWS_AS((void)resolve_config("nlarm", {{"p", "8"}, {"r", "9"}}), ConfigError);
  CHECK_THROWS_AS((void)resolve_config("nlarm", {{"p", "8"}, {"n", "65"}}), ConfigError);
  CHECK_THROWS_AS((void)resolve_config("nlarm", {{"solver", "admm"}}), ConfigError);
  CHECK_THROWS_AS((void)resolve_config("nlarm", {{"link", "cubic"}}), ConfigError);
  CHECK_THROWS_AS((void)resolve_config("nlarm", {{"step_size", "0"}}), ConfigError);
  CHECK_THROWS_AS((void)resolve_config("nlarm", {{"seed", "1"}, {"seeds", "2"}}), ConfigError);
  CHECK_THROWS_AS((void)resolve_config("nlarm", {{"record_time", "maybe"}}), ConfigError);
  CHECK_THROWS_AS((void)resolve_config("matrix-recover", {}), ConfigError);
}

TEST_CASE("solver settings per application") {
  auto cfg = resolve_config("nlarm", {{"p", "16"}, {"r", "2"}, {"r_star", "2"}});
  const auto nl = make_nlarm_problem(cfg, 1);
  const auto s = solver_config(cfg, nl.loss, 1);
  CHECK(s.step_size == doctest::Approx(0.5 / 3.0));
  CHECK(s.curvature_estimate == 3.0);
  CHECK(s.projected_rank == 2);
  CHECK(s.bksvd.krylov_iters == 2);

  cfg.step_size = 0.01;
  CHECK(solver_config(cfg, nl.loss, 1).step_size == 0.01);

  const auto lp_cfg = resolve_config("lpca", {{"p", "16"}, {"r_star", "2"}, {"r", "2"}});
  const auto lp = make_lpca_problem(lp_cfg, 1);
  CHECK(solver_config(lp_cfg, lp.loss, 1).step_size == doctest::Approx(4.0 / 16.0));

  const auto pme_cfg = resolve_config("pme", {{"p", "10"}, {"r_star", "2"}, {"r", "2"}});
  const auto inst = make_pme_problem(pme_cfg, 1);
  const auto ps = solver_config(pme_cfg, inst.loss(), 1);
  CHECK(ps.step_size == doctest::Approx(0.5 * 4.0));
  CHECK(ps.monitor_min_eig);
}

TEST_CASE("lemma study") {
  SUBCASE("ratios stay under the bound") {
    auto cfg = resolve_config("lemma-check", {{"trials", "30"}});
    const auto rep = run_lemma_study(cfg);
    CHECK(rep.ratios.size() == 30);
    CHECK(rep.all_within_bound());
    CHECK(rep.bound == doctest::Approx(1.0 + 2.0 * std::sqrt(2.0 / 3.0)));
  }
  SUBCASE("r = r* + 1 gives a large finite bound") {
    const auto dir = scratch("lemma_edge");
    const auto res = cli({"lemma-check", "--p", "32", "--r_star", "4", "--r", "5", "--trials", "20",
                          "--out", dir.string()});
    CHECK(res.code == 0);
    CHECK(std::filesystem::exists(dir / "lemma_ratios.csv"));
    const auto rep = run_lemma_study(resolve_config("lemma-check", {{"r", "5"}, {"trials", "1"}}));
    CHECK(std::isfinite(rep.bound));
    CHECK(rep.bound > 5.0);
  }
  CHECK(lemma_trial(32, 2, 8, 2, 5) == lemma_trial(32, 2, 8, 2, 5));
}

TEST_CASE("cli exit codes") {
  SUBCASE("malformed config") {
    const auto dir = scratch("bad_cfg");
    {
      std::ofstream f(dir / "bad.cfg");
      f << "p = 32\nthis line is broken\n";
    }
    const auto res = cli({"lemma-check", "--config", (dir / "bad.cfg").string()});
    CHECK(res.code == 2);
    CHECK(res.err.find("config line 2") != std::string::npos);
  }
  SUBCASE("missing config file") {
    CHECK(cli({"nlarm", "--config", "/nonexistent/x.cfg"}).code == 2);
  }
  SUBCASE("missing input matrix") {
    const auto res = cli({"matrix-recover", "--input", "/nonexistent/image.bin"});
    CHECK(res.code == 2);
    CHECK(res.err.find("input error") != std::string::npos);
  }
  SUBCASE("usage errors") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"nlarm", "--p"}).code == 2);
    CHECK(cli({"nlarm", "stray"}).code == 2);
    CHECK(cli({"--help"}).code == 0);
  }
  SUBCASE("aborted runs exit 1 and are recorded") {
    const auto dir = scratch("abort");
    const auto res = cli({"nlarm", "--p", "16", "--r", "2", "--r-star", "2", "--seeds", "1",
                          "--step-size", "1e200", "--max-iters", "5", "--out", dir.string()});
    CHECK(res.code == 1);
    CHECK(slurp(dir / "summary.csv").find("aborted: ") != std::string::npos);
  }
}

TEST_CASE("experiment outputs") {
  const std::vector<std::string> common = {"nlarm",          "--p",         "32",  "--r",
                                           "3",              "--r_star",    "3",   "--seeds",
                                           "1,2",            "--solvers",   "maple,svp",
                                           "--record_time",  "false",       "--max_iters", "60"};
  const auto a = scratch("run_a");
  const auto b = scratch("run_b");
  auto args_a = common;
  args_a.insert(args_a.end(), {"--out", a.string()});
  auto args_b = common;
  args_b.insert(args_b.end(), {"--out", b.string(), "--threads", "2"});

  REQUIRE(cli(args_a).code == 0);
  REQUIRE(cli(args_b).code == 0);
  for (const char* f : {"summary.csv", "summary_stats.csv", "trace_maple_seed1.csv",
                        "trace_svp_seed2.csv", "instance_seed2.json", "run.json"}) {
    CHECK(std::filesystem::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const std::string summary = slurp(a / "summary.csv");
  CHECK(summary.rfind("solver,seed,status,rel_error,objective,seconds,iterations,success\n", 0) == 0);
  CHECK(summary.find("maple,1,ok,") != std::string::npos);

  const auto meta = read_metadata_json(a / "instance_seed1.json");
  CHECK(meta.p == 32);
  CHECK(meta.n == 4 * 32 * 3);
}

TEST_CASE("summary statistics use median and mean over completed runs") {
  std::vector<RunSummary> runs(4);
  const double errs[] = {0.1, 0.3, 0.2, 9.0};
  for (std::size_t i = 0; i < 4; ++i) {
    runs[i].solver = "maple";
    runs[i].seed = i;
    runs[i].rel_error = errs[i];
  }
  runs[3].status = "aborted: x";
  std::ostringstream out;
  write_summary_stats_csv(out, runs);
  const std::string expected = "maple,rel_error," + format_real(0.2) + "," +
                               format_real((0.1 + 0.3 + 0.2) / 3.0) + ",3\n";
  CHECK(out.str().find(expected) != std::string::npos);
}

TEST_CASE("matrix recovery from a file") {
  const auto dir = scratch("recover");
  // Exactly rank-30 "image", scaled so most measurements stay in the link's
  // near-linear range.
  DenseMatrix image = maple::test::random_low_rank(64, 64, 30, 3);
  const double n = 4.0 * 64 * 30;
  image *= 0.5 * std::sqrt(n) / image.frobenius_norm();
  write_matrix(dir / "image.bin", image);

  const auto res = cli({"matrix-recover", "--input", (dir / "image.bin").string(), "--r", "30",
                        "--solvers", "maple,svp", "--max_iters", "300", "--out", dir.string()});
  REQUIRE(res.code == 0);
  const DenseMatrix estimate = read_matrix(dir / "estimate.bin");
  CHECK(test::rel_diff(estimate, image) <= 1e-3);
  CHECK(slurp(dir / "summary.csv").find("svp,1,ok,") != std::string::npos);
}
