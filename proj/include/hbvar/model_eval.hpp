#pragma once

#include "hbvar/conjugate.hpp"
#include "hbvar/draws.hpp"

namespace hbvar {

// Pointwise log-likelihood matrix, one column per subject (the marginal
// likelihood factorizes over subjects; within-subject time points do not
// factorize once subject-level parameters are integrated out). Entry (d, s) is
// log p(Y_s | draw d) with the subject-level parameters integrated out
// analytically, constants included:
//   models 2/3:  log c_kappa_s - (nR/2) log 2pi - (n/2) log|Sigma|
//                - tr(Sigma^{-1}(Rm_s + (B-E_s)^T Qinv_s (B-E_s)))/2
//   model 1:     log c_kappa_s - (nR/2) log pi + (nu/2) log|nu Sigma|
//                + lmgamma_R((n+nu)/2) - lmgamma_R(nu/2)
//                - ((n+nu)/2) log|nu Sigma + Rm_s + (B-E_s)^T Qinv_s (B-E_s)|
MatrixXd pointwise_loglik(const PosteriorDraws& draws,
                          const std::vector<SubjectStats>& stats, int n,
                          Exec policy = Exec::par);

struct WaicReport {
  double lppd = 0.0;
  double p_waic = 0.0;
  double waic = 0.0;  // -2 (lppd - p_waic), lower is better
  std::vector<double> pointwise;  // per-subject -2(lppd_s - p_waic_s)
};

// WAIC from a pointwise matrix; lppd uses a log-sum-exp, the draw-wise
// variance uses denominator n_draws - 1.
WaicReport waic(const MatrixXd& pointwise);

}  // namespace hbvar
