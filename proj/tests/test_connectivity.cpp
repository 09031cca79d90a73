#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hbvar/connectivity.hpp"
#include "hbvar/conjugate.hpp"
#include "hbvar/empirical_bayes.hpp"
#include "hbvar/simulate.hpp"
#include "test_helpers.hpp"

using namespace hbvar;
using namespace hbvar::testing;

namespace {

// draw container with iid N(mu, sd) coefficient entries and fixed Sigma draws
PosteriorDraws synthetic_draws(int q, int R, int L, int n_draws,
                               const MatrixXd& mu, double sd,
                               const std::vector<MatrixXd>& sigmas, uint64_t seed) {
  PosteriorDraws d;
  d.model = 2;
  d.q = q;
  d.R = R;
  d.L = L;
  d.S = 1;
  d.n = 10;
  d.chains.resize(1);
  Rng rng(seed);
  for (int i = 0; i < n_draws; ++i) {
    MatrixXd b(q, R);
    for (int r = 0; r < q; ++r)
      for (int c = 0; c < R; ++c) b(r, c) = mu(r, c) + sd * rng.normal();
    d.chains[0].B.push_back(std::move(b));
    d.chains[0].Sigma.push_back(sigmas[i % sigmas.size()]);
  }
  return d;
}

}  // namespace

TEST_CASE("sign rule keeps one-sided coefficients and drops symmetric ones") {
  const int q = 2, R = 2;
  MatrixXd mu = MatrixXd::Zero(q, R);
  mu(0, 0) = 1.0;  // far from zero: all draws positive
  std::vector<MatrixXd> sigmas = {MatrixXd::Identity(R, R)};
  PosteriorDraws d = synthetic_draws(q, R, 1, 400, mu, 0.05, sigmas, 2);

  // alternating +-1 coefficient at (1, 1)
  for (size_t i = 0; i < d.chains[0].B.size(); ++i)
    d.chains[0].B[i](1, 1) = (i % 2 == 0) ? 1.0 : -1.0;

  auto rules = default_ec_rules(1);
  CHECK(rules[0].kind == ThresholdKind::all_draws_same_sign);
  auto edges = ec_extract(d, rules);
  bool has_00 = false, has_11 = false;
  for (const auto& e : edges) {
    if (e.from_region == 0 && e.to_region == 0 && e.lag == 1) has_00 = true;
    if (e.from_region == 1 && e.to_region == 1 && e.lag == 1) has_11 = true;
  }
  CHECK(has_00);
  CHECK_FALSE(has_11);

  // same under the CI rule
  std::vector<ThresholdRule> ci_rules = {{ThresholdKind::ci_excludes_zero, 0.95, 0.0}};
  auto ci_edges = ec_extract(d, ci_rules);
  bool ci_00 = false, ci_11 = false;
  for (const auto& e : ci_edges) {
    if (e.from_region == 0 && e.to_region == 0) ci_00 = true;
    if (e.from_region == 1 && e.to_region == 1) ci_11 = true;
  }
  CHECK(ci_00);
  CHECK_FALSE(ci_11);
}

TEST_CASE("default rules mirror the lag-1 strict / lag-2 CI regime") {
  auto rules = default_ec_rules(2);
  CHECK(rules[0].kind == ThresholdKind::all_draws_same_sign);
  CHECK(rules[1].kind == ThresholdKind::ci_excludes_zero);
  CHECK(rules[1].ci_level == doctest::Approx(0.95));
  // FC rule: |mean| floor 0.35, one-sided draws
  ThresholdRule fc = default_fc_rule();
  CHECK(fc.magnitude_floor == doctest::Approx(0.35));
  CHECK(fc.kind == ThresholdKind::all_draws_same_sign);
  // difference defaults: 95% CI exclusion, FC floor 0.05
  CHECK(default_fc_diff_rule().magnitude_floor == doctest::Approx(0.05));
  CHECK(default_ec_diff_rule().kind == ThresholdKind::ci_excludes_zero);
}

TEST_CASE("FC extraction thresholds correlations and rejects model 3") {
  const int R = 3;
  MatrixXd base = MatrixXd::Identity(R, R);
  base(0, 1) = base(1, 0) = 0.5;   // retained: above 0.35
  base(0, 2) = base(2, 0) = 0.2;   // excluded: below floor
  std::vector<MatrixXd> sigmas = {base, base * 1.3};  // same correlations
  PosteriorDraws d = synthetic_draws(R, R, 1, 200, MatrixXd::Zero(R, R), 0.01,
                                     sigmas, 5);
  auto edges = fc_extract(d, default_fc_rule());
  REQUIRE(edges.size() == 1);
  CHECK(edges[0].region_a == 0);
  CHECK(edges[0].region_b == 1);
  CHECK(edges[0].mean == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(edges[0].positive);

  // diagonal draws: zero off-diagonal correlations, no edges
  std::vector<MatrixXd> diag = {MatrixXd::Identity(R, R)};
  PosteriorDraws d2 = synthetic_draws(R, R, 1, 100, MatrixXd::Zero(R, R), 0.01,
                                      diag, 6);
  CHECK(fc_extract(d2, default_fc_rule()).empty());

  d2.model = 3;
  CHECK_THROWS_AS(fc_extract(d2, default_fc_rule()), Error);

  // per-draw correlation matrices are symmetric with unit diagonal by
  // construction: mean correlation of (a,b) equals that of (b,a)
  auto ab = correlation_series(d, 0, 1);
  auto ba = correlation_series(d, 1, 0);
  CHECK(std::equal(ab.begin(), ab.end(), ba.begin()));
}

TEST_CASE("group differences: null case keeps nothing, shifted coefficient is found") {
  const int q = 2, R = 2;
  MatrixXd mu = MatrixXd::Constant(q, R, 0.2);
  std::vector<MatrixXd> sigmas = {MatrixXd::Identity(R, R)};
  PosteriorDraws a = synthetic_draws(q, R, 1, 600, mu, 0.1, sigmas, 7);

  // identical set with shuffled pairing
  PosteriorDraws b = a;
  Rng rng(8);
  for (size_t i = b.chains[0].B.size(); i > 1; --i)
    std::swap(b.chains[0].B[i - 1],
              b.chains[0].B[static_cast<size_t>(rng.uniform() * i)]);
  auto null_edges = group_diff_ec(a, b, {default_ec_diff_rule()});
  CHECK(null_edges.empty());

  // a genuinely shifted coefficient is retained
  PosteriorDraws c = synthetic_draws(q, R, 1, 600, mu, 0.1, sigmas, 9);
  for (auto& bm : c.chains[0].B) bm(0, 0) += 1.0;
  auto shifted = group_diff_ec(a, c, {default_ec_diff_rule()});
  REQUIRE(shifted.size() == 1);
  CHECK(shifted[0].from_region == 0);
  CHECK(shifted[0].to_region == 0);
  CHECK(shifted[0].mean < 0.0);  // a - c

  // dimension mismatch
  PosteriorDraws wrong = synthetic_draws(4, 2, 2, 50, MatrixXd::Zero(4, 2), 0.1,
                                         sigmas, 10);
  CHECK_THROWS_AS(group_diff_ec(a, wrong, {default_ec_diff_rule()}), Error);
}

TEST_CASE("retention is monotone in ci level and magnitude floor") {
  const int q = 3, R = 3;
  Rng seed_rng(99);
  std::vector<MatrixXd> sigmas = {MatrixXd::Identity(R, R)};
  for (int rep = 0; rep < 10; ++rep) {
    MatrixXd mu(q, R);
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < R; ++j) mu(i, j) = 0.5 * seed_rng.normal();
    PosteriorDraws d = synthetic_draws(q, R, 1, 300, mu, 0.4, sigmas,
                                       1000 + rep);
    ThresholdRule loose{ThresholdKind::ci_excludes_zero, 0.90, 0.0};
    ThresholdRule tight_ci{ThresholdKind::ci_excludes_zero, 0.99, 0.0};
    ThresholdRule tight_floor{ThresholdKind::ci_excludes_zero, 0.90, 0.3};
    auto count = [&](const ThresholdRule& r) {
      return ec_extract(d, {r}).size();
    };
    CHECK(count(tight_ci) <= count(loose));
    CHECK(count(tight_floor) <= count(loose));
  }
}

TEST_CASE("ec and fc extraction are invariant to draw permutation") {
  const int q = 2, R = 2;
  MatrixXd mu = MatrixXd::Constant(q, R, 0.1);
  MatrixXd s0 = MatrixXd::Identity(R, R);
  s0(0, 1) = s0(1, 0) = 0.45;
  MatrixXd s1 = 1.5 * s0;
  PosteriorDraws d = synthetic_draws(q, R, 1, 301, mu, 0.3, {s0, s1}, 303);

  PosteriorDraws shuffled = d;
  Rng rng(4);
  for (size_t i = shuffled.chains[0].B.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.uniform() * i);
    std::swap(shuffled.chains[0].B[i - 1], shuffled.chains[0].B[j]);
    std::swap(shuffled.chains[0].Sigma[i - 1], shuffled.chains[0].Sigma[j]);
  }
  auto e1 = ec_extract(d, default_ec_rules(1));
  auto e2 = ec_extract(shuffled, default_ec_rules(1));
  REQUIRE(e1.size() == e2.size());
  for (size_t i = 0; i < e1.size(); ++i) {
    CHECK(e1[i].from_region == e2[i].from_region);
    CHECK(e1[i].to_region == e2[i].to_region);
    CHECK(e1[i].mean == doctest::Approx(e2[i].mean).epsilon(1e-12));
  }
  auto f1 = fc_extract(d, default_fc_rule());
  auto f2 = fc_extract(shuffled, default_fc_rule());
  CHECK(f1.size() == f2.size());
}

TEST_CASE("scatter summary: self-comparison sits on the diagonal, tratio = mean/sd") {
  const int q = 2, R = 2;
  MatrixXd s0 = MatrixXd::Identity(R, R);
  s0(0, 1) = s0(1, 0) = 0.3;
  PosteriorDraws d = synthetic_draws(q, R, 1, 400, MatrixXd::Constant(q, R, 0.2),
                                     0.1, {s0}, 41);
  auto rows = summarize_scatter(d, d);
  CHECK(rows.size() == static_cast<size_t>(q * R + R * (R - 1) / 2));
  for (const auto& r : rows) {
    CHECK(r.mean_a == doctest::Approx(r.mean_b).epsilon(1e-14));
    CHECK(r.sd_a == doctest::Approx(r.sd_b).epsilon(1e-14));
    if (r.sd_a > 0)
      CHECK(r.tratio_a == doctest::Approx(r.mean_a / r.sd_a).epsilon(1e-12));
  }
}

TEST_CASE("region weights accumulate |mean| over incident retained edges") {
  std::vector<EcEdge> edges;
  EcEdge e1;
  e1.from_region = 0;
  e1.to_region = 1;
  e1.mean = 0.5;
  EcEdge e2;
  e2.from_region = 1;
  e2.to_region = 1;
  e2.mean = -0.25;
  edges = {e1, e2};
  VectorXd w = ec_region_weights(edges, 3);
  CHECK(w(0) == doctest::Approx(0.5));
  CHECK(w(1) == doctest::Approx(0.75));  // incident to both, self-loop counted once
  CHECK(w(2) == 0.0);
}

TEST_CASE("a simulated group difference is detected reliably") {
  // two groups identical except one lag-1 coefficient shifted by 0.4 (data on
  // the unit-variance scale); fit the common-covariance model to each and
  // compare at the default 95% CI difference rule
  int retained_count = 0;
  const int n_seeds = 10;
  for (int seed = 1; seed <= n_seeds; ++seed) {
    auto make_group = [&](double delta, uint64_t s) {
      GeneratorSpec spec;
      spec.R = 2;
      spec.S = 4;
      spec.T = 500;
      spec.L = 1;
      spec.nu = 60.0;
      spec.seed = s;
      spec.Sigma = MatrixXd::Identity(2, 2);
      spec.B = MatrixXd::Zero(2, 2);
      spec.B.diagonal().setConstant(0.3);
      spec.B(0, 1) = delta;  // region 1 -> region 2 at lag 1
      spec.ps_diag.assign(4, VectorXd::Constant(2, 200.0));
      return generate(spec);
    };
    SimulatedGroup ga = make_group(0.4, 100 + seed);
    SimulatedGroup gb = make_group(0.0, 200 + seed);

    auto fit = [&](const GroupDataset& data, uint64_t s) {
      // hyperparameters from empirical Bayes, as in the real workflow: the
      // subject-level spread kappa controls how much T=500 can sharpen the
      // group mean
      TuneConfig cfg;
      cfg.max_iter = 300;
      TuneResult tuned = tune(data, 1, cfg);
      LagDesign design = build_group_design(data, 1, Exec::seq);
      ShrinkagePrior prior = build_default_prior(data, 1, tuned.lambda, tuned.kappa);
      auto stats = subject_stats_all(design, prior, Exec::seq);
      PosteriorDraws d = sample_model2(combine(stats, prior, design.n), 800, s);
      d.L = 1;
      return d;
    };
    PosteriorDraws da = fit(ga.dataset, 11);
    PosteriorDraws db = fit(gb.dataset, 12);
    auto edges = group_diff_ec(da, db, {default_ec_diff_rule()});
    for (const auto& e : edges)
      if (e.from_region == 0 && e.to_region == 1 && e.lag == 1) ++retained_count;
  }
  CHECK(retained_count >= 9);
}

TEST_CASE("pairings only differ through MC noise") {
  const int q = 2, R = 2;
  std::vector<MatrixXd> sigmas = {MatrixXd::Identity(R, R)};
  int agreements = 0;
  const int runs = 20;
  for (int rep = 0; rep < runs; ++rep) {
    MatrixXd mu(q, R);
    Rng mr(7000 + rep);
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < R; ++j) mu(i, j) = 0.3 * mr.normal();
    PosteriorDraws a = synthetic_draws(q, R, 1, 500, mu, 0.1, sigmas, 500 + rep);
    PosteriorDraws b = synthetic_draws(q, R, 1, 500, MatrixXd::Zero(q, R), 0.1,
                                       sigmas, 600 + rep);
    auto edge_set = [&](const PosteriorDraws& bb) {
      auto edges = group_diff_ec(a, bb, {default_ec_diff_rule()});
      std::vector<int> ids;
      for (const auto& e : edges) ids.push_back(e.from_region * 10 + e.to_region);
      return ids;
    };
    std::vector<int> set1 = edge_set(b);
    PosteriorDraws b2 = b;
    std::rotate(b2.chains[0].B.begin(), b2.chains[0].B.begin() + 113,
                b2.chains[0].B.end());
    std::vector<int> set2 = edge_set(b2);
    if (set1 == set2) ++agreements;
  }
  CHECK(agreements >= static_cast<int>(0.95 * runs) - 1);
}
