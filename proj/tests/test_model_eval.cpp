#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hbvar/hier_sampler.hpp"
#include "hbvar/io.hpp"
#include "hbvar/model_eval.hpp"
#include "hbvar/simulate.hpp"
#include "test_helpers.hpp"

using namespace hbvar;
using namespace hbvar::testing;

TEST_CASE("duplicated subject yields identical pointwise columns") {
  GroupDataset g = random_dataset(1, 20, 2, 808);
  g.subjects.push_back(g.subjects[0]);
  g.subjects[1].subject_id = "copy";
  LagDesign design = build_group_design(g, 1, Exec::seq);
  ShrinkagePrior prior = build_default_prior(g, 1, 0.4, VectorXd::Constant(2, 0.4));
  auto stats = subject_stats_all(design, prior, Exec::seq);
  ConjugatePosterior post = combine(stats, prior, design.n);
  PosteriorDraws draws = sample_model2(post, 50, 3);
  draws.L = 1;
  MatrixXd pw = pointwise_loglik(draws, stats, design.n);
  CHECK((pw.col(0) - pw.col(1)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("column sums reproduce the total marginalized log-likelihood") {
  // model 1 draws: sum_s pointwise(d, s) must equal the sampler's own
  // marginal log-likelihood component plus the constants it drops
  GroupDataset g = random_dataset(3, 18, 2, 117);
  LagDesign design = build_group_design(g, 1, Exec::seq);
  ShrinkagePrior prior = build_default_prior(g, 1, 0.3, VectorXd::Constant(3, 0.3));
  auto stats = subject_stats_all(design, prior, Exec::seq);
  HierTarget target(stats, prior, design.n);

  HierFitOptions opts;
  opts.chains = 1;
  opts.warmup = 80;
  opts.draws = 20;
  opts.seed = 5;
  opts.fix_nu = true;
  opts.nu_fixed = 9.0;
  PosteriorDraws draws = nuts_fit(design, prior, opts, Exec::seq);
  draws.L = 1;

  MatrixXd pw = pointwise_loglik(draws, stats, design.n);
  double const_part = 0.0;
  for (const auto& st : stats) const_part += st.log_c_kappa;
  const_part -= 0.5 * design.S * design.n * design.R * std::log(M_PI);

  for (int d = 0; d < draws.total_draws(); ++d) {
    HierParams p;
    p.B = draws.b_draw(d);
    p.Sigma = draws.sigma_draw(d);
    p.nu = draws.nu_draw(d);
    double loglik = target.parts(target.from_constrained(p)).loglik;
    CHECK(pw.row(d).sum() == doctest::Approx(loglik + const_part).epsilon(1e-10));
  }
}

TEST_CASE("model 1 pointwise entries match the double-integration oracle") {
  GroupDataset g = random_dataset(2, 12, 2, 2024);
  LagDesign design = build_group_design(g, 1, Exec::seq);
  ShrinkagePrior prior = build_default_prior(g, 1, 0.4, VectorXd::Constant(2, 0.4));
  auto stats = subject_stats_all(design, prior, Exec::seq);

  PosteriorDraws draws;
  draws.model = 1;
  draws.q = 2;
  draws.R = 2;
  draws.L = 1;
  draws.S = 2;
  draws.n = design.n;
  draws.has_nu = true;
  draws.chains.resize(1);
  MatrixXd b(2, 2);
  b << 0.3, -0.05, 0.1, 0.25;
  MatrixXd sigma(2, 2);
  sigma << 1.1, 0.3, 0.3, 0.8;
  draws.chains[0].B = {b, b};
  draws.chains[0].Sigma = {sigma, sigma};
  draws.chains[0].nu = {7.0, 12.0};

  MatrixXd pw = pointwise_loglik(draws, stats, design.n);
  for (int d = 0; d < 2; ++d)
    for (int s = 0; s < 2; ++s) {
      McEstimate mc = mc_hier_subject_integral(design.subjects[s], prior, s, b, sigma,
                                               draws.chains[0].nu[d], 400000,
                                               900 + 10 * d + s);
      CHECK(std::abs(pw(d, s) - mc.log_value) < 3.0 * mc.se_log);
    }
}

TEST_CASE("non-finite pointwise entry reports the offending draw") {
  GroupDataset g = random_dataset(1, 14, 2, 5150);
  LagDesign design = build_group_design(g, 1, Exec::seq);
  ShrinkagePrior prior = build_default_prior(g, 1, 0.4, VectorXd::Constant(1, 0.4));
  auto stats = subject_stats_all(design, prior, Exec::seq);

  PosteriorDraws draws;
  draws.model = 2;
  draws.q = 2;
  draws.R = 2;
  draws.L = 1;
  draws.chains.resize(1);
  draws.chains[0].B = {MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2)};
  draws.chains[0].B[1](0, 0) = std::numeric_limits<double>::infinity();
  draws.chains[0].Sigma = {MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)};
  try {
    pointwise_loglik(draws, stats, design.n, Exec::seq);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("draw 1") != std::string::npos);
  }
}

TEST_CASE("waic of identical draws collapses to -2 sum loglik") {
  MatrixXd pw(3, 2);
  pw << -5.0, -7.0, -5.0, -7.0, -5.0, -7.0;
  WaicReport rep = waic(pw);
  CHECK(rep.p_waic == 0.0);
  CHECK(rep.lppd == doctest::Approx(-12.0));
  CHECK(rep.waic == doctest::Approx(24.0));
  CHECK(rep.pointwise.size() == 2);
  CHECK(rep.pointwise[0] == doctest::Approx(10.0));

  MatrixXd single(1, 2);
  single << -1.0, -2.0;
  CHECK_THROWS_AS(waic(single), Error);
}

TEST_CASE("waic is invariant under draw and subject permutations") {
  Rng rng(31);
  MatrixXd pw(40, 3);
  for (int d = 0; d < 40; ++d)
    for (int s = 0; s < 3; ++s) pw(d, s) = -10.0 + rng.normal();
  WaicReport base = waic(pw);

  MatrixXd pw_draws = pw;
  pw_draws.row(0).swap(pw_draws.row(39));
  pw_draws.row(3).swap(pw_draws.row(17));
  CHECK(waic(pw_draws).waic == doctest::Approx(base.waic).epsilon(1e-13));

  MatrixXd pw_subj = pw;
  pw_subj.col(0).swap(pw_subj.col(2));
  CHECK(waic(pw_subj).waic == doctest::Approx(base.waic).epsilon(1e-13));

  // log-sum-exp equals the naive average when magnitudes permit
  double naive_lppd = 0.0;
  for (int s = 0; s < 3; ++s) {
    double acc = 0.0;
    for (int d = 0; d < 40; ++d) acc += std::exp(pw(d, s));
    naive_lppd += std::log(acc / 40);
  }
  CHECK(base.lppd == doctest::Approx(naive_lppd).epsilon(1e-8));
}

TEST_CASE("markdown table renders the lag-by-model layout with flagged minima") {
  std::vector<std::vector<std::vector<double>>> table = {{
      {641306.0, 646658.0, 669358.0},
      {641158.0, 646460.0, 669078.0},
      {641179.0, 646469.0, 669109.0},
  }};
  std::string md = io::waic_markdown_table({"controls"}, table);
  CHECK(md.find("controls Model 1") != std::string::npos);
  CHECK(md.find("L=1") != std::string::npos);
  CHECK(md.find("L=2") != std::string::npos);
  CHECK(md.find("L=3") != std::string::npos);
  CHECK(md.find("**641158.0**") != std::string::npos);  // flagged minimum
  CHECK(md.find("**641306.0**") == std::string::npos);
}
