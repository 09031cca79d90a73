#include "hbvar/core_data.hpp"

#include <cmath>
#include <iostream>
#include <set>
#include <sstream>

namespace hbvar {

void validate_panel(const SubjectPanel& panel) {
  if (panel.T() < 2)
    throw Error(Errc::validation, "subject " + panel.subject_id + ": T must be >= 2");
  if (panel.R() < 1)
    throw Error(Errc::validation, "subject " + panel.subject_id + ": R must be >= 1");
  if (!panel.values.allFinite())
    throw Error(Errc::validation,
                "subject " + panel.subject_id + ": non-finite values in series");
  if (static_cast<int>(panel.region_labels.size()) != panel.R())
    throw Error(Errc::validation,
                "subject " + panel.subject_id + ": region label count != R");
  std::set<std::string> uniq(panel.region_labels.begin(), panel.region_labels.end());
  if (static_cast<int>(uniq.size()) != panel.R())
    throw Error(Errc::validation,
                "subject " + panel.subject_id + ": region labels not unique");
}

void validate_dataset(const GroupDataset& dataset) {
  if (dataset.subjects.empty())
    throw Error(Errc::validation, "group " + dataset.group_id + ": S must be >= 1");
  for (const auto& p : dataset.subjects) validate_panel(p);
  const auto& first = dataset.subjects.front();
  for (const auto& p : dataset.subjects) {
    if (p.T() != first.T())
      throw Error(Errc::validation,
                  "subject " + p.subject_id + ": T = " + std::to_string(p.T()) +
                      " differs from " + std::to_string(first.T()) +
                      " (subjects with differing T are rejected, not padded)");
    if (p.R() != first.R() || p.region_labels != first.region_labels)
      throw Error(Errc::validation,
                  "subject " + p.subject_id + ": region set differs within group");
  }
}

GroupDataset mean_center(const GroupDataset& dataset) {
  GroupDataset out = dataset;
  for (auto& p : out.subjects) {
    VectorXd means = p.values.colwise().mean();
    p.values.rowwise() -= means.transpose();
  }
  return out;
}

SubjectDesign build_lag_design(const SubjectPanel& panel, int L) {
  if (L < 1) throw Error(Errc::validation, "lag order must be >= 1");
  if (L >= panel.T())
    throw Error(Errc::dimension,
                "lag order " + std::to_string(L) + " >= T = " + std::to_string(panel.T()));
  if (!panel.values.allFinite())
    throw Error(Errc::validation, "non-finite values in series");
  const int T = panel.T(), R = panel.R();
  const int n = T - L, q = L * R;
  SubjectDesign d;
  d.Y = panel.values.bottomRows(n);
  d.X.resize(n, q);
  for (int t = 0; t < n; ++t)
    for (int l = 1; l <= L; ++l)
      d.X.block(t, (l - 1) * R, 1, R) = panel.values.row(L + t - l);
  return d;
}

LagDesign build_group_design(const GroupDataset& dataset, int L, Exec policy) {
  validate_dataset(dataset);
  LagDesign design;
  design.L = L;
  design.R = dataset.R();
  design.S = dataset.S();
  design.n = dataset.T() - L;
  design.q = L * dataset.R();
  design.region_labels = dataset.region_labels();
  design.subjects.resize(dataset.S());
  parallel_for(policy, dataset.S(), [&](int s) {
    design.subjects[s] = build_lag_design(dataset.subjects[s], L);
  });
  if (design.n < design.q)
    std::cerr << "warning: n = " << design.n << " < q = " << design.q
              << "; OLS statistics are rank-deficient (prior still regularizes the fit)\n";
  return design;
}

VarianceSummary sample_variance_summaries(const GroupDataset& dataset) {
  validate_dataset(dataset);
  const int R = dataset.R(), S = dataset.S();
  const double T = dataset.T();
  VarianceSummary out;
  out.max_var = VectorXd::Zero(R);
  out.mean_var = VectorXd::Zero(R);
  for (int s = 0; s < S; ++s) {
    const MatrixXd& v = dataset.subjects[s].values;
    VectorXd means = v.colwise().mean();
    VectorXd var = ((v.rowwise() - means.transpose()).colwise().squaredNorm() / (T - 1.0));
    if (s == 0)
      out.max_var = var;
    else
      out.max_var = out.max_var.cwiseMax(var);
    out.mean_var += var / static_cast<double>(S);
  }
  return out;
}

void ShrinkagePrior::validate() const {
  if (!(lambda > 0)) throw Error(Errc::validation, "lambda must be positive");
  if ((kappa.array() <= 0).any())
    throw Error(Errc::validation, "all kappa_s must be positive");
  if ((D.array() <= 0).any())
    throw Error(Errc::validation, "D diagonal must be strictly positive");
  if (!(nu0 > R() + 1))
    throw Error(Errc::validation, "nu0 must exceed R+1");
  if (relative_asymmetry(Psi0) > 1e-10)
    throw Error(Errc::validation, "Psi0 must be symmetric");
  cholesky(Psi0, "Psi0");
  if (B0.rows() != q() || B0.cols() != R())
    throw Error(Errc::dimension, "B0 must be q x R");
}

ShrinkagePrior build_prior_from_summaries(const VarianceSummary& vs, int L,
                                          double lambda, const VectorXd& kappa) {
  if ((vs.max_var.array() <= 0).any() || (vs.mean_var.array() <= 0).any())
    throw Error(Errc::degenerate_prior,
                "degenerate prior: a region has zero sample variance (constant series)");
  const int R = static_cast<int>(vs.max_var.size()), q = L * R;
  ShrinkagePrior prior;
  prior.lambda = lambda;
  prior.kappa = kappa;
  prior.B0 = MatrixXd::Zero(q, R);
  prior.Psi0 = vs.max_var.asDiagonal();
  prior.nu0 = R + 2;
  prior.D.resize(q);
  for (int l = 1; l <= L; ++l)
    for (int r = 0; r < R; ++r)
      prior.D((l - 1) * R + r) = 1.0 / (static_cast<double>(l) * l * vs.mean_var(r));
  prior.validate();
  return prior;
}

ShrinkagePrior build_default_prior(const GroupDataset& dataset, int L,
                                   double lambda, const VectorXd& kappa) {
  if (kappa.size() != dataset.S())
    throw Error(Errc::dimension, "kappa must have one entry per subject");
  return build_prior_from_summaries(sample_variance_summaries(dataset), L, lambda,
                                    kappa);
}

}  // namespace hbvar
