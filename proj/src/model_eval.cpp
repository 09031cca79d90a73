#include "hbvar/model_eval.hpp"

#include <cmath>

#include "hbvar/distributions.hpp"
#include "hbvar/parallel.hpp"

namespace hbvar {

MatrixXd pointwise_loglik(const PosteriorDraws& draws,
                          const std::vector<SubjectStats>& stats, int n,
                          Exec policy) {
  const int S = static_cast<int>(stats.size());
  const int D = draws.total_draws();
  const int R = draws.R;
  MatrixXd out(D, S);

  parallel_for(policy, D, [&](int d) {
    const MatrixXd& b = draws.b_draw(d);
    const MatrixXd& sigma = draws.sigma_draw(d);
    if (draws.has_nu) {
      const double nu = draws.nu_draw(d);
      const MatrixXd nu_sigma = nu * sigma;
      const double logdet_nu_sigma =
          logdet_from_chol(cholesky(nu_sigma, "nu Sigma", 0).lower);
      const double shared = -0.5 * n * R * std::log(M_PI) +
                            0.5 * nu * logdet_nu_sigma +
                            lmgamma(R, 0.5 * (n + nu)) - lmgamma(R, 0.5 * nu);
      for (int s = 0; s < S; ++s) {
        MatrixXd delta = b - stats[s].e_mat;
        MatrixXd a = symmetrize(nu_sigma + stats[s].r_mat +
                                delta.transpose() * stats[s].q_inv * delta);
        out(d, s) = shared + stats[s].log_c_kappa -
                    0.5 * (n + nu) * logdet_from_chol(cholesky(a, "A_s", 0).lower);
      }
    } else {
      MatrixXd chol_sigma = cholesky(sigma, "Sigma draw", 0).lower;
      const double logdet_sigma = logdet_from_chol(chol_sigma);
      const double shared =
          -0.5 * n * R * std::log(2.0 * M_PI) - 0.5 * n * logdet_sigma;
      for (int s = 0; s < S; ++s) {
        MatrixXd delta = b - stats[s].e_mat;
        MatrixXd quad = stats[s].r_mat + delta.transpose() * stats[s].q_inv * delta;
        MatrixXd w = chol_sigma.triangularView<Eigen::Lower>().solve(
            MatrixXd(chol_sigma.triangularView<Eigen::Lower>().solve(quad).transpose()));
        out(d, s) = shared + stats[s].log_c_kappa - 0.5 * w.trace();
      }
    }
  });

  for (int d = 0; d < D; ++d)
    for (int s = 0; s < S; ++s)
      if (!std::isfinite(out(d, s)))
        throw Error(Errc::numerical, "non-finite pointwise log-likelihood at draw " +
                                         std::to_string(d) + ", subject " +
                                         std::to_string(s));
  return out;
}

WaicReport waic(const MatrixXd& pointwise) {
  const int D = static_cast<int>(pointwise.rows());
  const int S = static_cast<int>(pointwise.cols());
  if (D < 2)
    throw Error(Errc::validation, "WAIC needs >= 2 draws (draw-wise variance)");

  WaicReport rep;
  rep.pointwise.resize(S);
  for (int s = 0; s < S; ++s) {
    double m = pointwise.col(s).maxCoeff();
    double sum_exp = 0.0;
    for (int d = 0; d < D; ++d) sum_exp += std::exp(pointwise(d, s) - m);
    double lppd_s = m + std::log(sum_exp / D);

    double mean_l = pointwise.col(s).mean();
    double var_l = (pointwise.col(s).array() - mean_l).square().sum() / (D - 1.0);

    rep.lppd += lppd_s;
    rep.p_waic += var_l;
    rep.pointwise[s] = -2.0 * (lppd_s - var_l);
  }
  rep.waic = -2.0 * (rep.lppd - rep.p_waic);
  return rep;
}

}  // namespace hbvar
