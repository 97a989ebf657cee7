#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "maple/linalg.hpp"
#include "maple/solvers.hpp"
#include "maple/synth.hpp"
#include "support.hpp"

using namespace maple;
using maple::test::rel_diff;

namespace {

struct Sensing {
  GroundTruth truth;
  NlarmLoss loss;
};

Sensing sensing(std::size_t p, std::size_t r_star, double kappa, const LinkFunction& link,
                double sigma, std::uint64_t seed, std::size_t n = 0) {
  if (n == 0) n = 4 * p * r_star;
  GroundTruth gt = gen_lowrank(p, r_star, kappa, seed);
  auto op = MeasurementOperator::fast_hadamard(p, n, seed + 77);
  auto y = gen_nlarm(gt, op, link, sigma, seed);
  return {std::move(gt), NlarmLoss(std::move(op), std::move(y), link)};
}

SolverConfig config(std::size_t r, double eta, std::size_t iters) {
  SolverConfig c;
  c.projected_rank = r;
  c.step_size = eta;
  c.max_iters = iters;
  c.bksvd.seed = 5;
  return c;
}

std::vector<double> errors(const SolverTrace& t) {
  std::vector<double> e;
  for (const auto& r : t.records) e.push_back(*r.rel_error);
  return e;
}

}  // namespace

TEST_CASE("zero observations keep every iterate at zero") {
  const std::size_t p = 16;
  auto op = MeasurementOperator::fast_hadamard(p, 64, 1);
  const NlarmLoss loss(op, std::vector<double>(64, 0.0), two_x_plus_sin_link());
  const auto cfg = config(3, 0.5, 10);
  for (const auto& trace : {maple_run(loss, cfg), svp_run(loss, cfg)}) {
    CHECK(trace.records.size() == 11);
    for (const auto& r : trace.records) CHECK(r.objective == trace.records.front().objective);
    CHECK(trace.estimate.max_abs() == 0.0);
  }
}

TEST_CASE("noiseless linear sensing converges linearly") {
  const auto s = sensing(64, 4, 1.0, identity_link(), 0.0, 3);
  const auto trace = maple_run(s.loss, config(4, 0.5, 200), &s.truth.l_star);
  CHECK(*trace.final_rel_error <= 1e-4);

  // Successive error ratios stay below one until the numerical floor.
  const auto e = errors(trace);
  std::vector<double> ratios;
  for (std::size_t t = 20; t + 1 < e.size() && e[t + 1] > 1e-10; ++t) ratios.push_back(e[t + 1] / e[t]);
  REQUIRE(ratios.size() > 10);
  std::sort(ratios.begin(), ratios.end());
  CHECK(ratios[ratios.size() / 2] < 0.95);
  CHECK(ratios[ratios.size() * 9 / 10] < 1.0);
}

TEST_CASE("unit step on n = 4pr linear sensing leaves the stable regime") {
  const auto s = sensing(64, 4, 1.0, identity_link(), 0.0, 3);
  const auto cfg = config(4, 1.0, 200);
  try {
    const auto trace = maple_run(s.loss, cfg, &s.truth.l_star);
    CHECK(*trace.final_rel_error > 1.0);
  } catch (const SolverAbort& e) {
    CHECK(!e.partial_trace().records.empty());
  }
}

TEST_CASE("iterates respect the projected rank") {
  const auto s = sensing(32, 3, 1.1, two_x_plus_sin_link(), 0.05, 4);
  const auto cfg = config(6, 1.0 / 6.0, 30);
  std::size_t seen = 0;
  const auto observer = [&](const IterateView& v) {
    const auto sigma = svd_exact(v.dense).sigma;
    CHECK(sigma[6] <= 1e-8 * std::max(sigma[0], 1e-300));
    ++seen;
  };
  (void)maple_run(s.loss, cfg, nullptr, observer);
  CHECK(seen == 30);
  const auto svp = svp_run(s.loss, cfg);
  const auto sigma = svd_exact(svp.estimate).sigma;
  CHECK(sigma[6] <= 1e-8 * sigma[0]);
}

TEST_CASE("exact projection is no worse than approximate projection") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto s = sensing(48, 4, 1.1, two_x_plus_sin_link(), 0.05, seed);
    const auto cfg = config(4, 1.0 / 6.0, 60);
    const auto m = errors(maple_run(s.loss, cfg, &s.truth.l_star));
    const auto v = errors(svp_run(s.loss, cfg, &s.truth.l_star));
    for (std::size_t t : {10u, 30u, 60u}) CHECK(v[t] <= 1.1 * m[t]);
  }
}

TEST_CASE("noise floor grows with the noise level") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    double previous = 0.0;
    for (double sigma : {0.0, 0.01, 0.05}) {
      const auto s = sensing(32, 3, 1.1, two_x_plus_sin_link(), sigma, seed);
      const auto trace = maple_run(s.loss, config(3, 1.0 / 6.0, 150), &s.truth.l_star);
      CHECK(*trace.final_rel_error > previous);
      previous = *trace.final_rel_error;
    }
  }
}

TEST_CASE("factorized gradient descent") {
  SUBCASE("converges on well-conditioned sensing") {
    const auto s = sensing(32, 3, 1.1, two_x_plus_sin_link(), 0.0, 6);
    auto cfg = config(3, 1.0, 1500);
    cfg.curvature_estimate = 3.0;
    const auto trace = fgd_run(s.loss, cfg, &s.truth.l_star);
    CHECK(*trace.final_rel_error <= 1e-3);
    CHECK(trace.solver == "fgd");
  }
  SUBCASE("does not reach the success threshold when ill-conditioned") {
    const auto s = sensing(32, 3, 1024.0, two_x_plus_sin_link(), 0.0, 7, 5 * 32 * 3);
    auto cfg = config(3, 1.0 / 6.0, 100);
    cfg.curvature_estimate = 3.0;
    CHECK(*fgd_run(s.loss, cfg, &s.truth.l_star).final_rel_error > 1e-3);
    CHECK(*maple_run(s.loss, cfg, &s.truth.l_star).final_rel_error < 1e-3);
  }
  SUBCASE("small steps descend on logistic pca") {
    GroundTruth gt = gen_lowrank(20, 2, 1.0, 8);
    gt.l_star *= 5.0;
    const LogisticPcaLoss loss(gen_lpca(gt, 8), 0.01);
    auto cfg = config(2, 1.0, 50);
    cfg.backoff = false;
    cfg.fgd_step = 1e-3;
    cfg.curvature_estimate = 0.25 + 0.02;
    const auto trace = fgd_run(loss, cfg);
    for (std::size_t t = 1; t < trace.records.size(); ++t) {
      CHECK(trace.records[t].objective <= trace.records[t - 1].objective + 1e-12);
    }
  }
}

TEST_CASE("woodbury step agrees with the dense step on every iteration") {
  const PmeInstance inst = gen_pme(24, 3, 24 * 200, {}, 9);
  const PmeLoss loss = inst.loss();
  SolverConfig cfg = config(3, 0.5 * 4.0, 50);
  std::size_t checked = 0;
  double worst = 0.0;
  const auto observer = [&](const IterateView& v) {
    REQUIRE(v.factors != nullptr);
    const auto provider = pme_gradient_step_provider(loss, *v.factors, v.eta);
    DenseMatrix dense = v.dense;
    dense.axpy(-v.eta, loss.gradient(v.dense));
    worst = std::max(worst, rel_diff(provider.to_dense(), dense));
    CHECK(v.factors->min_eigenvalue() ==
          doctest::Approx(sym_eig(symmetrized(v.dense)).values.back()).epsilon(1e-8).scale(1.0));
    ++checked;
  };
  const auto trace = maple_run(loss, cfg, &inst.truth.l_star, observer);
  CHECK(checked == 50);
  CHECK(worst <= 1e-8);
  CHECK(trace.backoffs == 0);
  CHECK(*trace.final_rel_error < 1.0);
}

TEST_CASE("step backoff and aborts") {
  const PmeInstance inst = gen_pme(16, 2, 16 * 50, {}, 10);
  const PmeLoss loss = inst.loss();

  SUBCASE("domain errors halve the step") {
    auto cfg = config(2, 200.0, 5);
    const auto trace = maple_run(loss, cfg);
    CHECK(trace.backoffs > 0);
    CHECK(!trace.warnings.empty());
    CHECK(std::isfinite(trace.final_objective));
    CHECK(svp_run(loss, cfg).backoffs > 0);
  }
  SUBCASE("without backoff the run aborts with a partial trace") {
    auto cfg = config(2, 200.0, 5);
    // The first halving in a backoff run marks the iteration that aborts here.
    const auto reference = maple_run(loss, cfg);
    REQUIRE(!reference.warnings.empty());
    const std::size_t first_bad = std::stoul(reference.warnings.front().substr(10));
    cfg.backoff = false;
    try {
      (void)maple_run(loss, cfg);
      FAIL("expected an abort");
    } catch (const SolverAbort& e) {
      const auto& partial = e.partial_trace().records;
      REQUIRE(partial.size() == first_bad);
      for (std::size_t i = 0; i < partial.size(); ++i) {
        CHECK(partial[i].objective == reference.records[i].objective);
      }
      CHECK(std::string(e.what()).find("domain") != std::string::npos);
    }
  }
  SUBCASE("non-finite objective aborts") {
    const auto s = sensing(16, 2, 1.0, identity_link(), 0.0, 11);
    try {
      (void)svp_run(s.loss, config(2, 1e200, 5), &s.truth.l_star);
      FAIL("expected an abort");
    } catch (const SolverAbort& e) {
      CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
      CHECK(e.partial_trace().final_rel_error.has_value());
    }
  }
}

TEST_CASE("trace bookkeeping") {
  const auto s = sensing(32, 2, 1.1, two_x_plus_sin_link(), 0.0, 12);

  SUBCASE("early stopping") {
    auto cfg = config(2, 1.0 / 6.0, 500);
    cfg.tolerance = 1e-6;
    const auto trace = maple_run(s.loss, cfg, &s.truth.l_star);
    CHECK(trace.stopped_early);
    CHECK(trace.records.size() < 501);
  }
  SUBCASE("wall time is nondecreasing") {
    const auto trace = maple_run(s.loss, config(2, 1.0 / 6.0, 20));
    for (std::size_t t = 1; t < trace.records.size(); ++t) {
      CHECK(trace.records[t].seconds >= trace.records[t - 1].seconds);
    }
  }
  SUBCASE("untimed traces are byte-identical") {
    auto cfg = config(2, 1.0 / 6.0, 20);
    cfg.record_time = false;
    const std::string a = trace_csv(maple_run(s.loss, cfg, &s.truth.l_star));
    const std::string b = trace_csv(maple_run(s.loss, cfg, &s.truth.l_star));
    CHECK(a == b);
    CHECK(a.rfind("iter,seconds,objective,rel_error,min_eig\n0,0,", 0) == 0);
  }
  SUBCASE("csv fields") {
    SolverTrace t;
    t.records.push_back({0, 0.0, 1.5, std::nullopt, std::nullopt});
    t.records.push_back({1, 0.25, 0.1, 0.5, -2.0});
    CHECK(trace_csv(t) ==
          "iter,seconds,objective,rel_error,min_eig\n0,0,1.5,,\n1,0.25,0.10000000000000001,0.5,-2\n");
  }
  SUBCASE("final truncation") {
    auto cfg = config(6, 1.0 / 6.0, 20);
    cfg.final_truncate_rank = 2;
    const auto trace = maple_run(s.loss, cfg);
    const auto sigma = svd_exact(trace.estimate).sigma;
    CHECK(sigma[2] <= 1e-10 * sigma[0]);
  }
  SUBCASE("min-eigenvalue monitor") {
    auto cfg = config(2, 1.0 / 6.0, 5);
    cfg.monitor_min_eig = true;
    for (const auto& r : svp_run(s.loss, cfg).records) CHECK(r.min_eig.has_value());
  }
}

TEST_CASE("configuration validation") {
  const auto s = sensing(8, 1, 1.0, identity_link(), 0.0, 13);
  CHECK_THROWS_AS((void)maple_run(s.loss, config(1, 0.0, 5)), std::invalid_argument);
  CHECK_THROWS_AS((void)maple_run(s.loss, config(9, 0.5, 5)), std::invalid_argument);
  CHECK_THROWS_AS((void)svp_run(s.loss, config(1, 0.5, 0)), std::invalid_argument);
  auto cfg = config(1, 0.5, 5);
  cfg.curvature_estimate = 0.0;
  CHECK_THROWS_AS((void)fgd_run(s.loss, cfg), std::invalid_argument);
}

TEST_CASE("relative error") {
  const DenseMatrix a = maple::test::random_matrix(4, 4, 1);
  CHECK(relative_error(a, a) == 0.0);
  CHECK(relative_error(DenseMatrix(4, 4), a) == doctest::Approx(1.0));
  CHECK(relative_error(2.0 * a, a) == doctest::Approx(1.0));
  CHECK(relative_error(a, DenseMatrix(4, 4)) == doctest::Approx(a.frobenius_norm()));
}

TEST_CASE("theoretical diagnostics") {
  SUBCASE("no inflation") {
    const auto rep = theoretical_diagnostics(config(5, 1.0, 1), 5, 1.0, 1.0);
    CHECK(rep.rank_inflation_required);
    CHECK(std::isinf(rep.nu));
    CHECK(!rep.notes.empty());
  }
  SUBCASE("perfect curvature") {
    const auto rep = theoretical_diagnostics(config(10, 1.0, 1), 2, 1.0, 1.0, 0.0);
    CHECK(rep.nu == doctest::Approx(std::sqrt(2.0)));
    CHECK(rep.rho == doctest::Approx(0.0));
    CHECK(rep.eta_opt == doctest::Approx(1.0));
    CHECK(rep.contraction_possible);
  }
  SUBCASE("2x + sin x link, hand-evaluated") {
    // ν² = 1 + 2√2·√(1/513) = 1.124878 at r/r* = 514; 9(1 − 1/ν²) = 0.99914 < 1.
    const auto wide = theoretical_diagnostics(config(514, 1.0 / 9.0, 1), 1, 1.0, 3.0, 0.5);
    CHECK(wide.contraction_possible);
    CHECK(wide.nu * wide.nu == doctest::Approx(1.124878).epsilon(1e-6));
    CHECK(wide.alpha_prime == doctest::Approx(1.25722).epsilon(1e-5));
    CHECK(wide.window_low == doctest::Approx(-0.040421).epsilon(1e-4));
    CHECK(wide.window_high == doctest::Approx(2.12126).epsilon(1e-5));
    CHECK(wide.eta_opt == doctest::Approx(1.0 / 9.0));
    CHECK(wide.rho < 1.0);
    CHECK(wide.contraction_low < 1.0 / 9.0);
    CHECK(wide.contraction_high > 1.0 / 9.0);
    CHECK(wide.implied_c1 == doctest::Approx(514 * 0.5 / 81.0));
    CHECK_FALSE(wide.c1_condition_violated);

    // At r/r* = 512 the same quantity is 1.00086 > 1: no step contracts.
    const auto narrow = theoretical_diagnostics(config(512, 1.0 / 9.0, 1), 1, 1.0, 3.0, 0.5);
    CHECK_FALSE(narrow.contraction_possible);
    CHECK(narrow.rho > 1.0);

    const auto small = theoretical_diagnostics(config(100, 1.0 / 9.0, 1), 1, 1.0, 3.0, 0.5);
    CHECK(small.c1_condition_violated);
  }
  CHECK_THROWS_AS((void)theoretical_diagnostics(config(4, 1.0, 1), 1, 2.0, 1.0), std::invalid_argument);
}
