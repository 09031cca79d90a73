#include "hbvar/simulate.hpp"

#include <cmath>

#include "hbvar/distributions.hpp"
#include "hbvar/parallel.hpp"

namespace hbvar {

namespace {

// deterministic block split for parallel MC: stream ids depend on the block
// index, never on the thread count
constexpr int kMcBlocks = 256;

McEstimate aggregate_log_weights(const std::vector<double>& logw) {
  const double n = static_cast<double>(logw.size());
  double m = -std::numeric_limits<double>::infinity();
  for (double v : logw) m = std::max(m, v);
  if (!std::isfinite(m))
    throw Error(Errc::numerical, "all MC weights are zero");
  double sum = 0.0, sum_sq = 0.0;
  for (double v : logw) {
    double a = std::exp(v - m);
    sum += a;
    sum_sq += a * a;
  }
  double mean_a = sum / n;
  double var_a = (sum_sq - n * mean_a * mean_a) / (n - 1.0);
  McEstimate est;
  est.log_value = m + std::log(mean_a);
  est.se_log = std::sqrt(std::max(var_a, 0.0) / n) / mean_a;
  est.ess = sum * sum / sum_sq;
  return est;
}

double log_matrix_normal_resid(const MatrixXd& resid, const MatrixXd& chol_sigma,
                               double logdet_sigma) {
  // log N(resid rows; 0, Sigma) = -(nR/2) log 2pi - (n/2) log|Sigma|
  //                               - ||resid L^{-T}||_F^2 / 2
  const double n = static_cast<double>(resid.rows());
  const double R = static_cast<double>(resid.cols());
  MatrixXd w = chol_sigma.triangularView<Eigen::Lower>().solve(resid.transpose());
  return -0.5 * n * R * std::log(2.0 * M_PI) - 0.5 * n * logdet_sigma -
         0.5 * w.squaredNorm();
}

}  // namespace

MatrixXd companion_matrix(const MatrixXd& coef, int L, int R) {
  MatrixXd c = MatrixXd::Zero(L * R, L * R);
  for (int l = 1; l <= L; ++l)
    c.block(0, (l - 1) * R, R, R) = coef.block((l - 1) * R, 0, R, R).transpose();
  if (L > 1)
    c.block(R, 0, (L - 1) * R, (L - 1) * R) =
        MatrixXd::Identity((L - 1) * R, (L - 1) * R);
  return c;
}

SimulatedGroup generate(const GeneratorSpec& spec, Exec policy) {
  const int R = spec.R, S = spec.S, T = spec.T, L = spec.L;
  const int q = L * R;
  if (R < 1 || S < 1 || L < 1 || T <= L)
    throw Error(Errc::validation, "generator needs R,S,L >= 1 and T > L");
  if (spec.B.rows() != q || spec.B.cols() != R)
    throw Error(Errc::dimension, "generator B must be q x R");
  if (static_cast<int>(spec.ps_diag.size()) != S)
    throw Error(Errc::dimension, "generator needs one P_s diagonal per subject");
  if (!(spec.nu > R + 1))
    throw Error(Errc::validation, "generator nu must exceed R+1");

  MatrixXd chol_nu_sigma = cholesky(MatrixXd(spec.nu * spec.Sigma), "nu Sigma").lower;

  SimulatedGroup out;
  out.dataset.group_id = "synthetic";
  out.dataset.subjects.resize(S);
  out.truth.B = spec.B;
  out.truth.Sigma = spec.Sigma;
  out.truth.nu = spec.nu;
  out.truth.subject_B.resize(S);
  out.truth.subject_Sigma.resize(S);

  std::vector<std::string> labels(R);
  for (int r = 0; r < R; ++r) labels[r] = "R" + std::to_string(r + 1);

  parallel_for(policy, S, [&](int s) {
    Rng rng = Rng::stream(spec.seed, static_cast<uint64_t>(s) + 1);
    VectorXd row_sqrt = spec.ps_diag[s].cwiseInverse().cwiseSqrt();

    MatrixXd sigma_s, coef_s;
    bool accepted = false;
    for (int attempt = 0; attempt < 1000 && !accepted; ++attempt) {
      sigma_s = inverse_wishart_draw(rng, chol_nu_sigma, spec.nu);
      MatrixXd chol_s = cholesky(sigma_s, "Sigma_s", 0).lower;
      coef_s = spec.B + row_sqrt.asDiagonal() *
                            standard_normal_matrix(rng, q, R) * chol_s.transpose();
      accepted = spec.exact_conditional ||
                 spectral_radius(companion_matrix(coef_s, L, R)) <
                     spec.stationarity_bound;
    }
    if (!accepted)
      throw Error(Errc::validation,
                  "generator spec infeasible: 1000 consecutive non-stationary draws");

    MatrixXd chol_s = cholesky(sigma_s, "Sigma_s", 0).lower;
    const int pre = spec.exact_conditional ? 0 : spec.burn_in;
    const int len = pre + T;
    MatrixXd series = MatrixXd::Zero(len, R);
    int t0 = 0;
    if (spec.exact_conditional) {
      for (int t = 0; t < L; ++t)
        for (int r = 0; r < R; ++r) series(t, r) = rng.normal();
      t0 = L;
    }
    for (int t = t0; t < len; ++t) {
      VectorXd mean = VectorXd::Zero(R);
      for (int l = 1; l <= L; ++l) {
        int tl = t - l;
        if (tl < 0) continue;  // zero history before the burn-in window
        mean += coef_s.block((l - 1) * R, 0, R, R).transpose() *
                series.row(tl).transpose();
      }
      VectorXd z(R);
      for (int r = 0; r < R; ++r) z(r) = rng.normal();
      series.row(t) = (mean + chol_s * z).transpose();
    }

    SubjectPanel panel;
    panel.subject_id = "sim_" + std::to_string(s + 1);
    panel.values = series.bottomRows(T);
    panel.region_labels = labels;
    out.dataset.subjects[s] = std::move(panel);
    out.truth.subject_B[s] = std::move(coef_s);
    out.truth.subject_Sigma[s] = std::move(sigma_s);
  });
  return out;
}

PosteriorDraws gibbs_oracle_model2(const LagDesign& design,
                                   const ShrinkagePrior& prior, int n_draws,
                                   int burn_in, uint64_t seed) {
  prior.validate();
  const int S = design.S, q = design.q, R = design.R, n = design.n;

  // fixed per-subject pieces
  std::vector<MatrixXd> row_sqrt_s(S), xty(S);
  std::vector<VectorXd> ps(S);
  VectorXd prec_sum = prior.p0_diag();
  for (int s = 0; s < S; ++s) {
    ps[s] = prior.ps_diag(s);
    MatrixXd f = symmetrize(design.subjects[s].X.transpose() * design.subjects[s].X);
    f.diagonal() += ps[s];
    row_sqrt_s[s] = tri_inverse_lower(cholesky(f, "P_s + X'X").lower).transpose();
    xty[s] = design.subjects[s].X.transpose() * design.subjects[s].Y;
    prec_sum += ps[s];
  }
  const VectorXd p0 = prior.p0_diag();
  const VectorXd group_row_sqrt = prec_sum.cwiseInverse().cwiseSqrt();
  const double sigma_dof = prior.nu0 + static_cast<double>(S) * n +
                           static_cast<double>(S) * q + q;

  Rng rng(seed);
  MatrixXd b = prior.B0;
  MatrixXd sigma = prior.nu0 * prior.Psi0 / (prior.nu0 - R - 1);
  std::vector<MatrixXd> b_s(S, prior.B0);

  PosteriorDraws out;
  out.model = 2;
  out.q = q;
  out.R = R;
  out.L = design.L;
  out.S = S;
  out.n = n;
  out.seed = seed;
  out.chains.resize(1);
  out.chains[0].B.reserve(n_draws);
  out.chains[0].Sigma.reserve(n_draws);

  for (int iter = 0; iter < burn_in + n_draws; ++iter) {
    MatrixXd chol_sigma = cholesky(sigma, "Sigma", 0).lower;
    // subject coefficients
    for (int s = 0; s < S; ++s) {
      MatrixXd mean = row_sqrt_s[s] * row_sqrt_s[s].transpose() *
                      (xty[s] + ps[s].asDiagonal() * b);
      b_s[s] = matrix_normal_draw(rng, mean, row_sqrt_s[s], chol_sigma);
    }
    // group coefficients
    MatrixXd weighted = p0.asDiagonal() * prior.B0;
    for (int s = 0; s < S; ++s) weighted += ps[s].asDiagonal() * b_s[s];
    MatrixXd mean_b = prec_sum.cwiseInverse().asDiagonal() * weighted;
    b = matrix_normal_draw(rng, mean_b, MatrixXd(group_row_sqrt.asDiagonal()),
                           chol_sigma);
    // covariance
    MatrixXd scale = prior.nu0 * prior.Psi0;
    for (int s = 0; s < S; ++s) {
      MatrixXd resid = design.subjects[s].Y - design.subjects[s].X * b_s[s];
      scale += resid.transpose() * resid;
      MatrixXd dev = b_s[s] - b;
      scale += dev.transpose() * ps[s].asDiagonal() * dev;
    }
    MatrixXd dev0 = b - prior.B0;
    scale += dev0.transpose() * p0.asDiagonal() * dev0;
    sigma = inverse_wishart_draw(rng, cholesky(symmetrize(scale), "Gibbs scale").lower,
                                 sigma_dof);

    if (iter >= burn_in) {
      out.chains[0].B.push_back(b);
      out.chains[0].Sigma.push_back(sigma);
    }
  }
  return out;
}

McEstimate mc_marginal_oracle(const LagDesign& design, const ShrinkagePrior& prior,
                              int mc_draws, uint64_t seed, Exec policy) {
  if (design.R > 3 || design.S > 3 || design.n + design.L > 20)
    throw Error(Errc::validation,
                "mc_marginal_oracle is restricted to tiny instances (R<=3, S<=3, T<=20)");
  prior.validate();
  const int S = design.S, q = design.q, R = design.R, n = design.n;

  std::vector<MatrixXd> k1(S), xty(S);
  std::vector<VectorXd> ps(S);
  double log_c_kappa = 0.0;
  for (int s = 0; s < S; ++s) {
    ps[s] = prior.ps_diag(s);
    MatrixXd f = symmetrize(design.subjects[s].X.transpose() * design.subjects[s].X);
    f.diagonal() += ps[s];
    CholResult cf = cholesky(f, "P_s + X'X");
    k1[s] = chol_inverse(cf.lower);
    xty[s] = design.subjects[s].X.transpose() * design.subjects[s].Y;
    log_c_kappa += 0.5 * R * (ps[s].array().log().sum() - cf.log_det);
  }
  MatrixXd chol_prior_scale =
      cholesky(MatrixXd(prior.nu0 * prior.Psi0), "nu0 Psi0").lower;
  VectorXd b_row_sqrt = prior.p0_diag().cwiseInverse().cwiseSqrt();

  std::vector<double> logw(mc_draws);
  const int blocks = std::min(kMcBlocks, mc_draws);
  parallel_for(policy, blocks, [&](int blk) {
    Rng rng = Rng::stream(seed, static_cast<uint64_t>(blk) + 1);
    const int lo = static_cast<int>(static_cast<long>(blk) * mc_draws / blocks);
    const int hi = static_cast<int>(static_cast<long>(blk + 1) * mc_draws / blocks);
    for (int i = lo; i < hi; ++i) {
      MatrixXd sigma = inverse_wishart_draw(rng, chol_prior_scale, prior.nu0);
      MatrixXd chol_sigma = cholesky(sigma, "prior Sigma", 0).lower;
      MatrixXd b = prior.B0 + b_row_sqrt.asDiagonal() *
                                  standard_normal_matrix(rng, q, R) *
                                  chol_sigma.transpose();
      double logdet_sigma = logdet_from_chol(chol_sigma);
      double lw = log_c_kappa - 0.5 * S * n * R * std::log(2.0 * M_PI) -
                  0.5 * S * n * logdet_sigma;
      for (int s = 0; s < S; ++s) {
        // ridge coefficients at this B, residual + deviation quadratic
        MatrixXd b_ridge = k1[s] * (xty[s] + ps[s].asDiagonal() * b);
        MatrixXd resid = design.subjects[s].Y - design.subjects[s].X * b_ridge;
        MatrixXd dev = b_ridge - b;
        MatrixXd quad = resid.transpose() * resid +
                        dev.transpose() * ps[s].asDiagonal() * dev;
        MatrixXd w = chol_sigma.triangularView<Eigen::Lower>().solve(
            MatrixXd(chol_sigma.triangularView<Eigen::Lower>()
                         .solve(quad)
                         .transpose()));
        lw -= 0.5 * w.trace();
      }
      logw[i] = lw;
    }
  });
  McEstimate est = aggregate_log_weights(logw);
  if (est.ess < 100)
    throw Error(Errc::unreliable_estimate,
                "marginal-likelihood MC effective sample size below 100");
  return est;
}

McEstimate mc_subject_integral(const SubjectDesign& design, const ShrinkagePrior& prior,
                               int subject_index, const MatrixXd& b,
                               const MatrixXd& sigma, int mc_draws, uint64_t seed,
                               Exec policy) {
  const int q = static_cast<int>(design.X.cols());
  const int R = static_cast<int>(design.Y.cols());
  MatrixXd chol_sigma = cholesky(sigma, "Sigma").lower;
  double logdet_sigma = logdet_from_chol(chol_sigma);
  VectorXd row_sqrt = prior.ps_diag(subject_index).cwiseInverse().cwiseSqrt();

  std::vector<double> logw(mc_draws);
  const int blocks = std::min(kMcBlocks, mc_draws);
  parallel_for(policy, blocks, [&](int blk) {
    Rng rng = Rng::stream(seed, static_cast<uint64_t>(blk) + 1);
    const int lo = static_cast<int>(static_cast<long>(blk) * mc_draws / blocks);
    const int hi = static_cast<int>(static_cast<long>(blk + 1) * mc_draws / blocks);
    for (int i = lo; i < hi; ++i) {
      MatrixXd coef = b + row_sqrt.asDiagonal() *
                              standard_normal_matrix(rng, q, R) *
                              chol_sigma.transpose();
      logw[i] = log_matrix_normal_resid(design.Y - design.X * coef, chol_sigma,
                                        logdet_sigma);
    }
  });
  return aggregate_log_weights(logw);
}

McEstimate mc_hier_subject_integral(const SubjectDesign& design,
                                    const ShrinkagePrior& prior, int subject_index,
                                    const MatrixXd& b, const MatrixXd& sigma,
                                    double nu, int mc_draws, uint64_t seed,
                                    Exec policy) {
  const int q = static_cast<int>(design.X.cols());
  const int R = static_cast<int>(design.Y.cols());
  MatrixXd chol_nu_sigma = cholesky(MatrixXd(nu * sigma), "nu Sigma").lower;
  VectorXd row_sqrt = prior.ps_diag(subject_index).cwiseInverse().cwiseSqrt();

  std::vector<double> logw(mc_draws);
  const int blocks = std::min(kMcBlocks, mc_draws);
  parallel_for(policy, blocks, [&](int blk) {
    Rng rng = Rng::stream(seed, static_cast<uint64_t>(blk) + 1);
    const int lo = static_cast<int>(static_cast<long>(blk) * mc_draws / blocks);
    const int hi = static_cast<int>(static_cast<long>(blk + 1) * mc_draws / blocks);
    for (int i = lo; i < hi; ++i) {
      MatrixXd sigma_s = inverse_wishart_draw(rng, chol_nu_sigma, nu);
      MatrixXd chol_s = cholesky(sigma_s, "Sigma_s", 0).lower;
      MatrixXd coef = b + row_sqrt.asDiagonal() *
                              standard_normal_matrix(rng, q, R) * chol_s.transpose();
      logw[i] = log_matrix_normal_resid(design.Y - design.X * coef, chol_s,
                                        logdet_from_chol(chol_s));
    }
  });
  return aggregate_log_weights(logw);
}

}  // namespace hbvar
