#pragma once

#include <Eigen/Dense>

#include "hbvar/common.hpp"

namespace hbvar {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// (A + A^T)/2; applied to every theoretically symmetric intermediate before
// factorization.
inline MatrixXd symmetrize(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

// Largest relative asymmetry |A - A^T| / max(1, |A|), used to assert the
// 1e-10 symmetry invariant on quadratic-form matrices.
double relative_asymmetry(const MatrixXd& a);

// Cholesky factor (lower) of a symmetric positive definite matrix. Throws
// Errc::numerical when the factorization fails outright and
// Errc::conditioning when the 2-norm condition estimate exceeds cond_limit.
struct CholResult {
  MatrixXd lower;
  double log_det = 0.0;  // of the original matrix
};
CholResult cholesky(const MatrixXd& a, const char* label,
                    double cond_limit = 1e12);

// Power-iteration estimate of the SPD condition number, via the factor L.
double spd_condition_estimate(const MatrixXd& a, const MatrixXd& lower);

// Solve A x = b given chol(A) = L L^T.
MatrixXd chol_solve(const MatrixXd& lower, const MatrixXd& rhs);

// A^{-1} from its Cholesky factor.
MatrixXd chol_inverse(const MatrixXd& lower);

// Inverse of a lower-triangular matrix.
MatrixXd tri_inverse_lower(const MatrixXd& lower);

inline double logdet_from_chol(const MatrixXd& lower) {
  return 2.0 * lower.diagonal().array().log().sum();
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b);

// Spectral radius of a general square matrix (companion-matrix stationarity
// checks).
double spectral_radius(const MatrixXd& a);

// Type-7 empirical quantile of a *sorted* sample.
double sorted_quantile(const std::vector<double>& sorted, double p);

}  // namespace hbvar
