#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hbvar/core_data.hpp"
#include "hbvar/rng.hpp"

using namespace hbvar;

namespace {

SubjectPanel make_panel(const std::string& id, const MatrixXd& values) {
  SubjectPanel p;
  p.subject_id = id;
  p.values = values;
  for (int r = 0; r < values.cols(); ++r)
    p.region_labels.push_back("R" + std::to_string(r + 1));
  return p;
}

}  // namespace

TEST_CASE("lag design on a counting series") {
  MatrixXd v(5, 1);
  v << 1, 2, 3, 4, 5;
  SubjectDesign d = build_lag_design(make_panel("a", v), 2);
  CHECK(d.Y.rows() == 3);
  CHECK(d.Y(0, 0) == 3);
  CHECK(d.Y(1, 0) == 4);
  CHECK(d.Y(2, 0) == 5);
  // rows (Y_{t-1}, Y_{t-2})
  CHECK(d.X(0, 0) == 2);
  CHECK(d.X(0, 1) == 1);
  CHECK(d.X(1, 0) == 3);
  CHECK(d.X(1, 1) == 2);
  CHECK(d.X(2, 0) == 4);
  CHECK(d.X(2, 1) == 3);
}

TEST_CASE("lag design zero case and dimension error") {
  MatrixXd z = MatrixXd::Zero(4, 2);
  SubjectDesign d = build_lag_design(make_panel("z", z), 1);
  CHECK(d.Y.cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.X.cwiseAbs().maxCoeff() == 0.0);

  MatrixXd v(3, 1);
  v << 1, 2, 3;
  CHECK_THROWS_AS(build_lag_design(make_panel("s", v), 3), Error);

  MatrixXd bad(4, 1);
  bad << 1, 2, std::numeric_limits<double>::quiet_NaN(), 4;
  CHECK_THROWS_AS(build_lag_design(make_panel("nan", bad), 1), Error);
}

TEST_CASE("lag reassembly reproduces the series tail") {
  Rng rng(3);
  MatrixXd v(20, 3);
  for (int t = 0; t < 20; ++t)
    for (int r = 0; r < 3; ++r) v(t, r) = rng.normal();
  const int L = 2;
  SubjectDesign d = build_lag_design(make_panel("p", v), L);
  for (int t = 0; t < d.Y.rows(); ++t) {
    for (int r = 0; r < 3; ++r) CHECK(d.Y(t, r) == v(L + t, r));
    for (int l = 1; l <= L; ++l)
      for (int r = 0; r < 3; ++r) CHECK(d.X(t, (l - 1) * 3 + r) == v(L + t - l, r));
  }
}

TEST_CASE("sample variance summaries") {
  MatrixXd v1(3, 1);
  v1 << 1, 2, 3;  // variance 1 with denominator T-1
  GroupDataset one{"g", {make_panel("a", v1)}};
  VarianceSummary s1 = sample_variance_summaries(one);
  CHECK(s1.max_var(0) == doctest::Approx(1.0));
  CHECK(s1.mean_var(0) == doctest::Approx(1.0));

  MatrixXd v2(3, 1);
  v2 << 1, 4, 1;  // mean 2, deviations (-1, 2, -1): variance 3
  GroupDataset two{"g", {make_panel("a", v1), make_panel("b", v2)}};
  VarianceSummary s2 = sample_variance_summaries(two);
  CHECK(s2.max_var(0) == doctest::Approx(3.0));
  CHECK(s2.mean_var(0) == doctest::Approx(2.0));
}

TEST_CASE("default prior construction follows the lag-shrinkage recipe") {
  // R=1, one subject, sample variance 2: series (-sqrt(2), 0, sqrt(2))
  MatrixXd w(3, 1);
  w << -std::sqrt(2.0), 0.0, std::sqrt(2.0);
  GroupDataset g{"g", {make_panel("a", w)}};
  ShrinkagePrior prior = build_default_prior(g, 2, 1.0, VectorXd::Ones(1));
  CHECK(prior.D(0) == doctest::Approx(0.5));    // lag 1: 1/(1*2)
  CHECK(prior.D(1) == doctest::Approx(0.125));  // lag 2: 1/(4*2)
  CHECK(prior.Psi0(0, 0) == doctest::Approx(2.0));
  CHECK(prior.nu0 == 3.0);  // R+2

  // doubling lambda halves P0 exactly
  ShrinkagePrior prior2 = build_default_prior(g, 2, 2.0, VectorXd::Ones(1));
  CHECK((prior2.p0_diag() - 0.5 * prior.p0_diag()).cwiseAbs().maxCoeff() == 0.0);

  // nu0 = R+2 for any dataset
  MatrixXd m2 = MatrixXd::Random(10, 4);
  GroupDataset g4{"g4", {make_panel("a", m2)}};
  CHECK(build_default_prior(g4, 1, 0.3, VectorXd::Ones(1)).nu0 == 6.0);
}

TEST_CASE("heavier shrinkage on higher lags: D ratio is (l1/l2)^2") {
  MatrixXd v = MatrixXd::Random(30, 2);
  GroupDataset g{"g", {make_panel("a", v)}};
  ShrinkagePrior prior = build_default_prior(g, 3, 0.7, VectorXd::Ones(1));
  for (int r = 0; r < 2; ++r) {
    CHECK(prior.D(1 * 2 + r) / prior.D(0 * 2 + r) == doctest::Approx(1.0 / 4.0));
    CHECK(prior.D(2 * 2 + r) / prior.D(0 * 2 + r) == doctest::Approx(1.0 / 9.0));
  }
  // prior precision grows with lag
  VectorXd p0 = prior.p0_diag();
  CHECK(p0(2) > p0(0));
  CHECK(p0(4) > p0(2));
  // P_s positive for positive kappa
  CHECK((prior.ps_diag(0).array() > 0).all());
}

TEST_CASE("degenerate prior on constant series") {
  MatrixXd v = MatrixXd::Ones(5, 1);
  GroupDataset g{"g", {make_panel("c", v)}};
  CHECK_THROWS_AS(build_default_prior(g, 1, 1.0, VectorXd::Ones(1)), Error);
}

TEST_CASE("dataset validation rejects inconsistent panels") {
  MatrixXd v = MatrixXd::Random(6, 2);
  SubjectPanel a = make_panel("a", v);
  SubjectPanel b = make_panel("b", MatrixXd::Random(7, 2));  // differing T
  CHECK_THROWS_AS(validate_dataset(GroupDataset{"g", {a, b}}), Error);

  SubjectPanel dup = a;
  dup.region_labels[1] = dup.region_labels[0];
  CHECK_THROWS_AS(validate_panel(dup), Error);

  GroupDataset empty{"g", {}};
  CHECK_THROWS_AS(validate_dataset(empty), Error);
}

TEST_CASE("mean centering removes per-region means") {
  MatrixXd v(4, 2);
  v << 1, 10, 2, 12, 3, 14, 4, 16;
  GroupDataset g{"g", {make_panel("a", v)}};
  GroupDataset c = mean_center(g);
  CHECK(c.subjects[0].values.colwise().mean().cwiseAbs().maxCoeff() < 1e-14);
  GroupDataset c2 = mean_center(c);
  CHECK((c2.subjects[0].values - c.subjects[0].values).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("constant shifts vanish after centering") {
  Rng rng(21);
  MatrixXd v(15, 2);
  for (int t = 0; t < 15; ++t)
    for (int r = 0; r < 2; ++r) v(t, r) = rng.normal();
  GroupDataset g{"g", {make_panel("a", v)}};
  GroupDataset shifted{"g", {make_panel("a", v.array() + 7.5)}};
  GroupDataset c1 = mean_center(g);
  GroupDataset c2 = mean_center(shifted);
  CHECK((c1.subjects[0].values - c2.subjects[0].values).cwiseAbs().maxCoeff() < 1e-12);
  // identical centered data implies an identical lagged design downstream
  SubjectDesign d1 = build_lag_design(c1.subjects[0], 1);
  SubjectDesign d2 = build_lag_design(c2.subjects[0], 1);
  CHECK((d1.X - d2.X).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("group design runs per subject and agrees across policies") {
  Rng rng(11);
  std::vector<SubjectPanel> panels;
  for (int s = 0; s < 4; ++s) {
    MatrixXd v(12, 2);
    for (int t = 0; t < 12; ++t)
      for (int r = 0; r < 2; ++r) v(t, r) = rng.normal();
    panels.push_back(make_panel("s" + std::to_string(s), v));
  }
  GroupDataset g{"g", panels};
  LagDesign seq = build_group_design(g, 2, Exec::seq);
  LagDesign par = build_group_design(g, 2, Exec::par);
  CHECK(seq.n == 10);
  CHECK(seq.q == 4);
  for (int s = 0; s < 4; ++s) {
    CHECK((seq.subjects[s].X - par.subjects[s].X).cwiseAbs().maxCoeff() == 0.0);
    CHECK((seq.subjects[s].Y - par.subjects[s].Y).cwiseAbs().maxCoeff() == 0.0);
  }
}
