#pragma once

#include "hbvar/linalg.hpp"
#include "hbvar/rng.hpp"

namespace hbvar {

// The inverse-Wishart density convention used throughout:
//   IW(Psi, nu):  p(S) \propto |S|^{-(nu+d+1)/2} exp(-tr(Psi S^{-1})/2),
// proper for nu > d-1, mean Psi/(nu-d-1) for nu > d+1. The scalar case
// d=1 is IG(nu/2, psi/2).
inline const char* iw_convention_string() {
  return "|Sigma|^-(nu+R+1)/2 exp(-tr(Psi Sigma^-1)/2)";
}

// log of the multivariate gamma function Gamma_d(x), x > (d-1)/2.
double lmgamma(int d, double x);

// d/dx lmgamma(d, x) = sum_j digamma(x + (1-j)/2).
double lmgamma_deriv(int d, double x);

double digamma(double x);

// q x r matrix of iid N(0,1); fill order is row-major and part of the
// determinism contract.
MatrixXd standard_normal_matrix(Rng& rng, int rows, int cols);

// Draw from the matrix-normal MN(mean, row_cov, col_cov) given square roots
// A A^T = row_cov and C C^T = col_cov: mean + A Z C^T.
MatrixXd matrix_normal_draw(Rng& rng, const MatrixXd& mean,
                            const MatrixXd& row_sqrt, const MatrixXd& col_sqrt);

// Inverse-Wishart draw under the convention above, via the Bartlett
// decomposition: Sigma = (L_psi A^{-T})(L_psi A^{-T})^T with chol(Psi) = L_psi.
MatrixXd inverse_wishart_draw(Rng& rng, const MatrixXd& chol_psi_lower, double nu);

double log_inverse_wishart_density(const MatrixXd& sigma, const MatrixXd& psi,
                                   double nu);

// log density of N(x; mean, Sigma) parameterized by chol(Sigma).
double log_mvn_density(const VectorXd& x, const VectorXd& mean,
                       const MatrixXd& chol_sigma_lower);

}  // namespace hbvar
