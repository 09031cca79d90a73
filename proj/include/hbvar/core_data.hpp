#pragma once

#include <string>
#include <vector>

#include "hbvar/linalg.hpp"
#include "hbvar/parallel.hpp"

namespace hbvar {

// One subject's regionwise time series: T rows (time points), R columns
// (regions).
struct SubjectPanel {
  std::string subject_id;
  MatrixXd values;  // T x R
  std::vector<std::string> region_labels;

  int T() const { return static_cast<int>(values.rows()); }
  int R() const { return static_cast<int>(values.cols()); }
};

struct GroupDataset {
  std::string group_id;
  std::vector<SubjectPanel> subjects;

  int S() const { return static_cast<int>(subjects.size()); }
  int T() const { return subjects.empty() ? 0 : subjects.front().T(); }
  int R() const { return subjects.empty() ? 0 : subjects.front().R(); }
  const std::vector<std::string>& region_labels() const {
    return subjects.front().region_labels;
  }
};

void validate_panel(const SubjectPanel& panel);
// All panels must share T, R and region labels; differing T is rejected.
void validate_dataset(const GroupDataset& dataset);

// Subtracts each region's per-subject mean (the VAR carries no intercept).
GroupDataset mean_center(const GroupDataset& dataset);

// Stacked lagged regression form for one subject: row t of X is
// (Y_{t-1}, ..., Y_{t-L}) concatenated, responses start at t = L+1.
struct SubjectDesign {
  MatrixXd Y;  // n x R
  MatrixXd X;  // n x q, q = L*R
};

struct LagDesign {
  int L = 0, n = 0, q = 0, R = 0, S = 0;
  std::vector<SubjectDesign> subjects;
  std::vector<std::string> region_labels;
};

SubjectDesign build_lag_design(const SubjectPanel& panel, int L);
LagDesign build_group_design(const GroupDataset& dataset, int L,
                             Exec policy = Exec::par);

struct VarianceSummary {
  VectorXd max_var;   // per region, max over subjects
  VectorXd mean_var;  // per region, mean over subjects
};

// Per-region sample variances (denominator T-1), reduced over subjects.
VarianceSummary sample_variance_summaries(const GroupDataset& dataset);

// All shrinkage hyperparameters of the hierarchy. P0 = (lambda*D)^{-1} and
// P_s = (kappa_s*D)^{-1} are diagonal because D is; they are exposed as
// diagonal vectors.
struct ShrinkagePrior {
  MatrixXd B0;        // q x R prior coefficient mean
  double lambda = 0;  // group-level shrinkage
  VectorXd kappa;     // length S, subject-level shrinkage
  VectorXd D;         // length q, diagonal of D
  MatrixXd Psi0;      // R x R
  double nu0 = 0;

  int q() const { return static_cast<int>(D.size()); }
  int R() const { return static_cast<int>(Psi0.rows()); }
  int S() const { return static_cast<int>(kappa.size()); }

  VectorXd p0_diag() const { return (lambda * D.array()).inverse().matrix(); }
  VectorXd ps_diag(int s) const { return (kappa(s) * D.array()).inverse().matrix(); }

  void validate() const;
};

// Default prior construction: Psi0 diagonal from max per-region variance,
// nu0 = R+2, D entry for (lag l, region r) = 1/(l^2 * mean variance of r),
// B0 = 0. Throws Errc::degenerate_prior when a region has zero variance.
ShrinkagePrior build_default_prior(const GroupDataset& dataset, int L,
                                   double lambda, const VectorXd& kappa);

// Same construction from precomputed variance summaries (hyperparameter
// tuning re-evaluates the prior at many (lambda, kappa) points).
ShrinkagePrior build_prior_from_summaries(const VarianceSummary& vs, int L,
                                          double lambda, const VectorXd& kappa);

}  // namespace hbvar
