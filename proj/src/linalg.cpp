#include "hbvar/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace hbvar {

double relative_asymmetry(const MatrixXd& a) {
  double denom = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() / denom;
}

CholResult cholesky(const MatrixXd& a, const char* label, double cond_limit) {
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "Cholesky factorization failed for " << label << " (" << a.rows()
        << "x" << a.cols() << ")";
    throw Error(Errc::numerical, msg.str());
  }
  CholResult res;
  res.lower = llt.matrixL();
  res.log_det = logdet_from_chol(res.lower);
  if (cond_limit > 0) {
    double cond = spd_condition_estimate(a, res.lower);
    if (cond > cond_limit) {
      std::ostringstream msg;
      msg << label << " is numerically singular: condition estimate " << cond
          << " exceeds " << cond_limit;
      throw Error(Errc::conditioning, msg.str());
    }
  }
  return res;
}

double spd_condition_estimate(const MatrixXd& a, const MatrixXd& lower) {
  const int n = static_cast<int>(a.rows());
  if (n == 1) return 1.0;
  VectorXd v = VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  double lam_max = 0.0;
  for (int it = 0; it < 25; ++it) {
    VectorXd w = a * v;
    lam_max = w.norm();
    if (lam_max == 0.0) return std::numeric_limits<double>::infinity();
    v = w / lam_max;
  }
  // inverse iteration through the factor for the smallest eigenvalue
  VectorXd u = VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  double inv_norm = 1.0;
  for (int it = 0; it < 25; ++it) {
    VectorXd w = lower.triangularView<Eigen::Lower>().solve(u);
    w = lower.transpose().triangularView<Eigen::Upper>().solve(w);
    inv_norm = w.norm();
    if (!(inv_norm > 0.0) || !std::isfinite(inv_norm))
      return std::numeric_limits<double>::infinity();
    u = w / inv_norm;
  }
  return lam_max * inv_norm;
}

MatrixXd chol_solve(const MatrixXd& lower, const MatrixXd& rhs) {
  MatrixXd x = lower.triangularView<Eigen::Lower>().solve(rhs);
  return lower.transpose().triangularView<Eigen::Upper>().solve(x);
}

MatrixXd chol_inverse(const MatrixXd& lower) {
  MatrixXd inv = chol_solve(lower, MatrixXd::Identity(lower.rows(), lower.rows()));
  return symmetrize(inv);
}

MatrixXd tri_inverse_lower(const MatrixXd& lower) {
  return lower.triangularView<Eigen::Lower>().solve(
      MatrixXd::Identity(lower.rows(), lower.rows()));
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

double spectral_radius(const MatrixXd& a) {
  Eigen::EigenSolver<MatrixXd> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double sorted_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw Error(Errc::validation, "quantile of empty sample");
  if (sorted.size() == 1) return sorted[0];
  double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  auto lo = static_cast<size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace hbvar
