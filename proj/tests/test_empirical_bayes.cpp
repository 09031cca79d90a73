#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hbvar/empirical_bayes.hpp"
#include "hbvar/simulate.hpp"
#include "test_helpers.hpp"

using namespace hbvar;
using namespace hbvar::testing;

TEST_CASE("Nelder-Mead maximizes a shifted quadratic") {
  VectorXd c(3);
  c << 1.0, -2.0, 0.5;
  auto obj = [&](const VectorXd& x) { return -(x - c).squaredNorm(); };
  NelderMeadResult res =
      nelder_mead_maximize(obj, VectorXd::Zero(3), 0.5, 1e-10, 2000);
  CHECK(res.converged);
  CHECK((res.x - c).cwiseAbs().maxCoeff() < 1e-4);
  // best-so-far trace is non-decreasing
  for (size_t i = 1; i < res.trace.size(); ++i)
    CHECK(res.trace[i].second >= res.trace[i - 1].second);
  // a rejected region (non-finite plateau) is skated around
  auto holed = [&](const VectorXd& x) {
    if (x(0) > 0.9 && x(0) < 0.95) return std::numeric_limits<double>::quiet_NaN();
    return -(x - c).squaredNorm();
  };
  NelderMeadResult res2 =
      nelder_mead_maximize(holed, VectorXd::Zero(3), 0.5, 1e-10, 2000);
  CHECK(res2.value > -0.01);
}

TEST_CASE("tune improves on the start point and re-evaluates bit-identically") {
  GroupDataset g = random_dataset(3, 40, 2, 112);
  const int L = 1;
  LagDesign design = build_group_design(g, L, Exec::seq);
  VarianceSummary vs = sample_variance_summaries(g);

  TuneConfig cfg;
  cfg.max_iter = 400;
  TuneResult res = tune(g, L, cfg);

  double at_start = tune_objective(design, vs, cfg.start_lambda,
                                   VectorXd::Constant(3, cfg.start_kappa));
  CHECK(res.best_log_marginal >= at_start);

  // the reported optimum reproduces exactly when re-evaluated
  double re = tune_objective(design, vs, res.lambda, res.kappa);
  CHECK(re == res.best_log_marginal);

  for (size_t i = 1; i < res.trace.size(); ++i)
    CHECK(res.trace[i].second >= res.trace[i - 1].second);
  CHECK(res.lambda > 0.0);
  CHECK((res.kappa.array() > 0.0).all());
}

TEST_CASE("permuting subjects permutes the kappa estimate") {
  GroupDataset g = random_dataset(3, 30, 2, 515);
  TuneConfig cfg;
  cfg.max_iter = 300;
  TuneResult a = tune(g, 1, cfg);

  GroupDataset p = g;
  std::swap(p.subjects[0], p.subjects[2]);
  TuneResult b = tune(p, 1, cfg);

  CHECK(b.lambda == doctest::Approx(a.lambda).epsilon(1e-5));
  CHECK(b.kappa(0) == doctest::Approx(a.kappa(2)).epsilon(1e-5));
  CHECK(b.kappa(2) == doctest::Approx(a.kappa(0)).epsilon(1e-5));
  CHECK(b.kappa(1) == doctest::Approx(a.kappa(1)).epsilon(1e-5));
}

TEST_CASE("recovered shrinkage lands near the grid-search maximizer") {
  // data generated from the model with known moderate shrinkage
  GeneratorSpec spec;
  spec.R = 2;
  spec.S = 4;
  spec.T = 80;
  spec.L = 1;
  spec.nu = 50.0;  // mild heterogeneity
  spec.seed = 9090;
  spec.Sigma = MatrixXd::Identity(2, 2);
  spec.B = MatrixXd::Zero(2, 2);
  spec.B.diagonal().setConstant(0.4);
  spec.ps_diag.assign(4, VectorXd::Constant(2, 8.0));
  SimulatedGroup sim = generate(spec);

  const int L = 1;
  LagDesign design = build_group_design(sim.dataset, L, Exec::seq);
  VarianceSummary vs = sample_variance_summaries(sim.dataset);

  TuneConfig cfg;
  cfg.max_iter = 600;
  TuneResult tuned = tune(sim.dataset, L, cfg);

  // 50-point log grid over a shared shrinkage g = lambda = kappa_s
  double best_g = 0, best_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 50; ++i) {
    double g = std::exp(std::log(1e-3) +
                        (std::log(10.0) - std::log(1e-3)) * i / 49.0);
    double val = tune_objective(design, vs, g, VectorXd::Constant(4, g));
    if (val > best_val) {
      best_val = val;
      best_g = g;
    }
  }
  // the joint maximizer must not lose to the 1-D grid
  CHECK(tuned.best_log_marginal >= best_val - 1e-3);
  // and the recovered lambda stays within a factor of 3 of the grid maximizer
  CHECK(tuned.lambda / best_g < 3.0);
  CHECK(best_g / tuned.lambda < 3.0);
}

TEST_CASE("objective failure at the start point raises an initialization error") {
  auto broken = [](const VectorXd&) {
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK_THROWS_AS(nelder_mead_maximize(broken, VectorXd::Zero(2), 0.5, 1e-8, 50),
                  Error);
}

TEST_CASE("two-stage mode matches or beats the start and stays positive") {
  GroupDataset g = random_dataset(5, 30, 2, 77);
  TuneConfig cfg;
  cfg.max_iter = 250;
  cfg.two_stage = true;
  TuneResult res = tune(g, 1, cfg);
  CHECK(res.lambda > 0);
  CHECK((res.kappa.array() > 0).all());
  LagDesign design = build_group_design(g, 1, Exec::seq);
  VarianceSummary vs = sample_variance_summaries(g);
  double at_start = tune_objective(design, vs, cfg.start_lambda,
                                   VectorXd::Constant(5, cfg.start_kappa));
  CHECK(res.best_log_marginal >= at_start);
}
