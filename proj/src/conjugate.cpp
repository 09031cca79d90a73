#include "hbvar/conjugate.hpp"

#include <cmath>
#include <sstream>

#include "hbvar/distributions.hpp"

namespace hbvar {

SubjectStats subject_stats(const SubjectDesign& design, const ShrinkagePrior& prior,
                           int subject_index) {
  const int q = static_cast<int>(design.X.cols());
  const int R = static_cast<int>(design.Y.cols());
  if (prior.q() != q || prior.R() != R)
    throw Error(Errc::dimension, "prior dimensions do not match design");
  if (subject_index < 0 || subject_index >= prior.S())
    throw Error(Errc::dimension, "subject index out of range");

  const VectorXd p = prior.ps_diag(subject_index);
  const MatrixXd w = symmetrize(design.X.transpose() * design.X);
  const MatrixXd xty = design.X.transpose() * design.Y;

  MatrixXd f = w;
  f.diagonal() += p;
  CholResult chol_f = [&] {
    try {
      return cholesky(f, "P_s + X'X");
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "subject " << subject_index << ": " << e.what();
      throw Error(e.code(), msg.str());
    }
  }();

  SubjectStats st;
  st.k1 = chol_inverse(chol_f.lower);

  // OLS statistics; with n < q the least-squares solution is not unique and a
  // warning was issued when the design was built.
  st.ols_coef = design.X.completeOrthogonalDecomposition().solve(design.Y);
  MatrixXd ols_resid = design.Y - design.X * st.ols_coef;
  st.resid_crossprod = symmetrize(ols_resid.transpose() * ols_resid);

  const MatrixXd k1_xty = st.k1 * xty;               // K1 X'Y, q x R
  const MatrixXd m = design.Y - design.X * k1_xty;   // n x R
  const MatrixXd pk1 = p.asDiagonal() * st.k1;       // P K1
  MatrixXd i_minus = MatrixXd::Identity(q, q) - st.k1 * MatrixXd(p.asDiagonal());

  st.q_inv = symmetrize(pk1 * w * pk1.transpose() +
                        i_minus.transpose() * p.asDiagonal() * i_minus);
  CholResult chol_qinv = cholesky(st.q_inv, "Q_s^{-1}");

  MatrixXd rhs = pk1 * (design.X.transpose() * m) +
                 i_minus.transpose() * (p.asDiagonal() * k1_xty);
  st.e_mat = chol_solve(chol_qinv.lower, rhs);

  const MatrixXd k1_p_k1 = symmetrize(st.k1 * p.asDiagonal() * st.k1);
  st.r_mat = symmetrize(m.transpose() * m + xty.transpose() * k1_p_k1 * xty -
                        st.e_mat.transpose() * st.q_inv * st.e_mat);

  st.log_c_kappa = 0.5 * R * (p.array().log().sum() - chol_f.log_det);
  return st;
}

std::vector<SubjectStats> subject_stats_all(const LagDesign& design,
                                            const ShrinkagePrior& prior,
                                            Exec policy) {
  if (prior.S() != design.S)
    throw Error(Errc::dimension, "prior subject count does not match design");
  std::vector<SubjectStats> stats(design.S);
  parallel_for(policy, design.S, [&](int s) {
    stats[s] = subject_stats(design.subjects[s], prior, s);
  });
  return stats;
}

ConjugatePosterior combine(const std::vector<SubjectStats>& stats,
                           const ShrinkagePrior& prior, int n,
                           DofConvention convention) {
  const int q = prior.q(), R = prior.R();
  const int S = static_cast<int>(stats.size());
  const VectorXd p0 = prior.p0_diag();

  ConjugatePosterior post;
  post.q = q;
  post.R = R;
  post.S = S;
  post.n = n;
  post.nu0 = prior.nu0;
  post.dof_convention = convention;

  MatrixXd prec = MatrixXd(p0.asDiagonal());
  MatrixXd weighted = p0.asDiagonal() * prior.B0;
  MatrixXd data_terms = MatrixXd::Zero(R, R);
  for (const auto& st : stats) {
    if (relative_asymmetry(st.q_inv) > 1e-10 || relative_asymmetry(st.r_mat) > 1e-10)
      throw Error(Errc::numerical, "subject statistics lost symmetry");
    prec += st.q_inv;
    weighted += st.q_inv * st.e_mat;
    data_terms += st.r_mat + st.e_mat.transpose() * st.q_inv * st.e_mat;
  }
  post.coef_prec = symmetrize(prec);
  CholResult chol_prec = cholesky(post.coef_prec, "Ptilde");
  post.coef_mean = chol_solve(chol_prec.lower, weighted);

  post.scale = symmetrize(prior.nu0 * prior.Psi0 + data_terms +
                          prior.B0.transpose() * p0.asDiagonal() * prior.B0 -
                          post.coef_mean.transpose() * post.coef_prec * post.coef_mean);
  try {
    cholesky(post.scale, "Psi_n", 0);
  } catch (const Error&) {
    throw Error(Errc::numerical, "Psi_n not positive definite after symmetrization");
  }

  post.dof = prior.nu0 + static_cast<double>(S) * n;
  if (convention == DofConvention::paper) post.dof -= q;
  return post;
}

PosteriorDraws sample_model2(const ConjugatePosterior& post, int n_draws,
                             uint64_t seed) {
  if (!(post.dof > post.R + 1))
    throw Error(Errc::improper_posterior,
                "posterior dof must exceed R+1 for sampling");
  CholResult chol_scale = cholesky(post.scale, "Psi_n");
  CholResult chol_prec = cholesky(post.coef_prec, "Ptilde");
  // row covariance square root: Ptilde^{-1} = L^{-T} L^{-1}
  MatrixXd row_sqrt = tri_inverse_lower(chol_prec.lower).transpose();

  PosteriorDraws out;
  out.model = 2;
  out.q = post.q;
  out.R = post.R;
  out.S = post.S;
  out.n = post.n;
  out.seed = seed;
  out.dof_convention = post.dof_convention;
  out.chains.resize(1);
  auto& chain = out.chains[0];
  chain.B.reserve(n_draws);
  chain.Sigma.reserve(n_draws);

  Rng rng(seed);
  for (int d = 0; d < n_draws; ++d) {
    MatrixXd sigma = inverse_wishart_draw(rng, chol_scale.lower, post.dof);
    MatrixXd col_sqrt = cholesky(sigma, "Sigma draw", 0).lower;
    chain.B.push_back(matrix_normal_draw(rng, post.coef_mean, row_sqrt, col_sqrt));
    chain.Sigma.push_back(std::move(sigma));
  }
  return out;
}

PosteriorDraws sample_model3(const ConjugatePosterior& post, int n_draws,
                             uint64_t seed, Model3Mode mode) {
  const int R = post.R;
  double shape, scale_factor;
  if (mode == Model3Mode::per_region) {
    shape = 0.5 * post.dof;
    scale_factor = 0.5;
  } else {
    shape = 0.5 * (post.dof - 2.0 * R);
    scale_factor = 0.5 * post.dof;
  }
  if (!(shape > 0))
    throw Error(Errc::improper_posterior,
                "model 3 inverse-gamma shape is non-positive");

  CholResult chol_prec = cholesky(post.coef_prec, "Ptilde");
  MatrixXd row_sqrt = tri_inverse_lower(chol_prec.lower).transpose();

  PosteriorDraws out;
  out.model = 3;
  out.q = post.q;
  out.R = R;
  out.S = post.S;
  out.n = post.n;
  out.seed = seed;
  out.dof_convention = post.dof_convention;
  out.chains.resize(1);
  auto& chain = out.chains[0];
  chain.B.reserve(n_draws);
  chain.Sigma.reserve(n_draws);

  Rng rng(seed);
  for (int d = 0; d < n_draws; ++d) {
    VectorXd vars(R);
    for (int r = 0; r < R; ++r)
      vars(r) = rng.inverse_gamma(shape, scale_factor * post.scale(r, r));
    MatrixXd z = standard_normal_matrix(rng, post.q, R);
    MatrixXd b = post.coef_mean + row_sqrt * z * vars.cwiseSqrt().asDiagonal();
    chain.B.push_back(std::move(b));
    chain.Sigma.push_back(MatrixXd(vars.asDiagonal()));
  }
  return out;
}

MarginalLikelihood log_marginal_likelihood(const LagDesign& design,
                                           const ShrinkagePrior& prior,
                                           Exec policy) {
  prior.validate();
  auto stats = subject_stats_all(design, prior, policy);
  ConjugatePosterior post = combine(stats, prior, design.n);

  const int R = design.R;
  const double Sn = static_cast<double>(design.S) * design.n;
  const VectorXd p0 = prior.p0_diag();

  double log_c_kappa = 0.0;
  for (const auto& st : stats) log_c_kappa += st.log_c_kappa;

  CholResult chol_prec = cholesky(post.coef_prec, "Ptilde");
  CholResult chol_scale = cholesky(post.scale, "Psi_n");
  CholResult chol_prior_scale = cholesky(MatrixXd(prior.nu0 * prior.Psi0), "nu0 Psi0");

  MarginalLikelihood out;
  out.log_value = -0.5 * Sn * R * std::log(M_PI) + log_c_kappa +
                  0.5 * R * p0.array().log().sum() - 0.5 * R * chol_prec.log_det +
                  0.5 * prior.nu0 * chol_prior_scale.log_det -
                  0.5 * (prior.nu0 + Sn) * chol_scale.log_det +
                  lmgamma(R, 0.5 * (prior.nu0 + Sn)) - lmgamma(R, 0.5 * prior.nu0);
  return out;
}

}  // namespace hbvar
