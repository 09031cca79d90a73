#pragma once

#include "hbvar/conjugate.hpp"
#include "hbvar/nuts.hpp"

namespace hbvar {

// Group-level parameters of the hierarchy with subject-specific covariances
// integrated out.
struct HierParams {
  MatrixXd B;      // q x R
  MatrixXd Sigma;  // R x R SPD
  double nu = 0.0; // > nu_lb
};

struct LogTargetParts {
  double total = 0.0;
  double loglik = 0.0;    // marginal log-likelihood terms (subject covariances integrated out)
  double log_prior = 0.0; // N(0,1) on the decorrelated coefficients + IW on Sigma
  double jacobian = 0.0;  // unconstrained-map log-Jacobians
  bool finite = true;
};

// Unconstrained posterior density of (B, Sigma, nu) given per-subject
// statistics. The state vector packs
//   [ B_spec (q x R, row-major) | chol(Sigma) lower triangle row-major with
//     log-diagonal | zeta = log(nu - nu_lb) ]
// with B = B0 + chol(P0^{-1}) B_spec chol(Sigma)^T (non-centered, so the
// coefficient block is a priori standard normal) and nu_lb = R+2. With nu
// fixed the zeta coordinate is dropped.
//
// The marginal likelihood term per subject is
//   -((n+nu)/2) logdet( nu Sigma + Rm_s + (B-E_s)^T Qinv_s (B-E_s) )
// plus (S nu / 2) logdet(nu Sigma) and S [lmgamma_R((n+nu)/2) - lmgamma_R(nu/2)].
class HierTarget {
 public:
  HierTarget(std::vector<SubjectStats> stats, const ShrinkagePrior& prior, int n,
             bool fix_nu = false, double nu_fixed = 0.0, Exec policy = Exec::seq);

  int dim() const { return dim_; }
  int coef_dim() const { return q_ * R_; }
  double nu_lb() const { return nu_lb_; }
  bool fix_nu() const { return fix_nu_; }
  int n_subjects() const { return static_cast<int>(stats_.size()); }

  // log target; -inf (never a throw) on rejectable states
  double logp(const VectorXd& x) const;
  // fused value+gradient; gradient is exact matrix calculus, finite-difference
  // certified in tests
  double logp_grad(const VectorXd& x, VectorXd& grad) const;
  LogTargetParts parts(const VectorXd& x) const;

  // bijection between the packed state and (B, Sigma, nu)
  HierParams to_constrained(const VectorXd& x) const;
  VectorXd from_constrained(const HierParams& p) const;

  Exec policy = Exec::seq;

 private:
  double evaluate(const VectorXd& x, VectorXd* grad, LogTargetParts* parts) const;

  std::vector<SubjectStats> stats_;
  MatrixXd b0_;
  VectorXd lp_diag_;   // sqrt of P0^{-1} diagonal
  MatrixXd nu0_psi0_;
  double nu0_ = 0.0;
  int n_ = 0, q_ = 0, R_ = 0;
  bool fix_nu_ = false;
  double nu_fixed_ = 0.0;
  double nu_lb_ = 0.0;
  int dim_ = 0;
};

struct HierFitOptions {
  int chains = 3;
  int warmup = 200;
  int draws = 500;
  uint64_t seed = 1;
  bool fix_nu = false;
  double nu_fixed = 0.0;
  double target_accept = 0.8;
  int max_tree_depth = 10;
};

// Model 1 fit: independent NUTS chains over the marginalized target. Chains
// run in parallel on derived substreams; draws are bit-reproducible for a
// fixed (seed, chains, warmup, draws).
PosteriorDraws nuts_fit(const LagDesign& design, const ShrinkagePrior& prior,
                        const HierFitOptions& opts, Exec policy = Exec::par);

}  // namespace hbvar
