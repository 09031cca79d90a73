#include "hbvar/distributions.hpp"

#include <cmath>

namespace hbvar {

double lmgamma(int d, double x) {
  if (x <= 0.5 * (d - 1))
    throw Error(Errc::validation, "lmgamma argument out of domain");
  double res = 0.25 * d * (d - 1) * std::log(M_PI);
  for (int j = 1; j <= d; ++j) res += std::lgamma(x + 0.5 * (1 - j));
  return res;
}

double lmgamma_deriv(int d, double x) {
  double res = 0.0;
  for (int j = 1; j <= d; ++j) res += digamma(x + 0.5 * (1 - j));
  return res;
}

double digamma(double x) {
  if (!(x > 0.0)) throw Error(Errc::validation, "digamma requires x > 0");
  double res = 0.0;
  while (x < 6.0) {
    res -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x, inv2 = inv * inv;
  res += std::log(x) - 0.5 * inv;
  // Bernoulli-number asymptotic tail
  res -= inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 -
           inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * 691.0 / 32760.0)))));
  return res;
}

MatrixXd standard_normal_matrix(Rng& rng, int rows, int cols) {
  MatrixXd z(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) z(i, j) = rng.normal();
  return z;
}

MatrixXd matrix_normal_draw(Rng& rng, const MatrixXd& mean,
                            const MatrixXd& row_sqrt, const MatrixXd& col_sqrt) {
  MatrixXd z = standard_normal_matrix(rng, mean.rows(), mean.cols());
  return mean + row_sqrt * z * col_sqrt.transpose();
}

MatrixXd inverse_wishart_draw(Rng& rng, const MatrixXd& chol_psi_lower, double nu) {
  const int d = static_cast<int>(chol_psi_lower.rows());
  if (!(nu > d - 1))
    throw Error(Errc::improper_posterior, "inverse-Wishart dof must exceed dim-1");
  MatrixXd a = MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    a(i, i) = std::sqrt(rng.chi_square(nu - i));
    for (int j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  // Sigma = L_psi (A A^T)^{-1} L_psi^T = T^T T with T = A^{-1} L_psi^T
  MatrixXd t = a.triangularView<Eigen::Lower>().solve(
      MatrixXd(chol_psi_lower.transpose()));
  return symmetrize(t.transpose() * t);
}

double log_inverse_wishart_density(const MatrixXd& sigma, const MatrixXd& psi,
                                   double nu) {
  const int d = static_cast<int>(sigma.rows());
  auto chol_sigma = cholesky(sigma, "IW argument", 0);
  auto chol_psi = cholesky(psi, "IW scale", 0);
  MatrixXd sigma_inv = chol_inverse(chol_sigma.lower);
  double quad = (psi.array() * sigma_inv.array()).sum();  // tr(Psi Sigma^{-1})
  return 0.5 * nu * chol_psi.log_det - 0.5 * nu * d * std::log(2.0) -
         lmgamma(d, 0.5 * nu) - 0.5 * (nu + d + 1) * chol_sigma.log_det -
         0.5 * quad;
}

double log_mvn_density(const VectorXd& x, const VectorXd& mean,
                       const MatrixXd& chol_sigma_lower) {
  VectorXd w = chol_sigma_lower.triangularView<Eigen::Lower>().solve(x - mean);
  double log_det = logdet_from_chol(chol_sigma_lower);
  return -0.5 * (x.size() * std::log(2.0 * M_PI) + log_det + w.squaredNorm());
}

}  // namespace hbvar
