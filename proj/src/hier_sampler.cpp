#include "hbvar/hier_sampler.hpp"

#include <cmath>

#include "hbvar/distributions.hpp"
#include "hbvar/parallel.hpp"

namespace hbvar {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kZetaMax = 40.0;
constexpr double kLogDiagMax = 100.0;
}  // namespace

HierTarget::HierTarget(std::vector<SubjectStats> stats, const ShrinkagePrior& prior,
                       int n, bool fix_nu, double nu_fixed, Exec exec_policy)
    : policy(exec_policy),
      stats_(std::move(stats)),
      b0_(prior.B0),
      nu0_(prior.nu0),
      n_(n),
      q_(prior.q()),
      R_(prior.R()),
      fix_nu_(fix_nu),
      nu_fixed_(nu_fixed) {
  lp_diag_ = prior.p0_diag().cwiseInverse().cwiseSqrt();
  nu0_psi0_ = prior.nu0 * prior.Psi0;
  nu_lb_ = R_ + 2;
  dim_ = q_ * R_ + R_ * (R_ + 1) / 2 + (fix_nu_ ? 0 : 1);
  if (fix_nu_ && !(nu_fixed_ > nu_lb_))
    throw Error(Errc::validation, "fixed nu must exceed nu_lb = R+2");
}

HierParams HierTarget::to_constrained(const VectorXd& x) const {
  HierParams p;
  Eigen::Map<const MatrixXd> z_t(x.data(), R_, q_);  // row-major q x R block
  MatrixXd z = z_t.transpose();
  MatrixXd chol_sigma = MatrixXd::Zero(R_, R_);
  int k = q_ * R_;
  for (int i = 0; i < R_; ++i)
    for (int j = 0; j <= i; ++j, ++k)
      chol_sigma(i, j) = (i == j) ? std::exp(x(k)) : x(k);
  p.Sigma = symmetrize(chol_sigma * chol_sigma.transpose());
  p.nu = fix_nu_ ? nu_fixed_ : nu_lb_ + std::exp(x(dim_ - 1));
  p.B = b0_ + lp_diag_.asDiagonal() * z * chol_sigma.transpose();
  return p;
}

VectorXd HierTarget::from_constrained(const HierParams& p) const {
  VectorXd x(dim_);
  MatrixXd chol_sigma = cholesky(p.Sigma, "Sigma", 0).lower;
  // Z = diag(1/lp) (B - B0) L^{-T}
  MatrixXd scaled = lp_diag_.cwiseInverse().asDiagonal() * (p.B - b0_);
  MatrixXd z = chol_sigma.triangularView<Eigen::Lower>()
                   .solve(scaled.transpose())
                   .transpose();
  for (int i = 0; i < q_; ++i)
    for (int j = 0; j < R_; ++j) x(i * R_ + j) = z(i, j);
  int k = q_ * R_;
  for (int i = 0; i < R_; ++i)
    for (int j = 0; j <= i; ++j, ++k)
      x(k) = (i == j) ? std::log(chol_sigma(i, i)) : chol_sigma(i, j);
  if (!fix_nu_) {
    if (!(p.nu > nu_lb_))
      throw Error(Errc::validation, "nu must exceed nu_lb = R+2");
    x(dim_ - 1) = std::log(p.nu - nu_lb_);
  }
  return x;
}

double HierTarget::logp(const VectorXd& x) const {
  return evaluate(x, nullptr, nullptr);
}

double HierTarget::logp_grad(const VectorXd& x, VectorXd& grad) const {
  grad.resize(dim_);
  return evaluate(x, &grad, nullptr);
}

LogTargetParts HierTarget::parts(const VectorXd& x) const {
  LogTargetParts p;
  double v = evaluate(x, nullptr, &p);
  p.total = v;
  p.finite = std::isfinite(v);
  return p;
}

double HierTarget::evaluate(const VectorXd& x, VectorXd* grad,
                            LogTargetParts* parts) const {
  const int S = n_subjects();

  // unpack
  Eigen::Map<const MatrixXd> z_t(x.data(), R_, q_);
  MatrixXd z = z_t.transpose();  // q x R
  MatrixXd chol_l = MatrixXd::Zero(R_, R_);
  {
    int k = q_ * R_;
    for (int i = 0; i < R_; ++i)
      for (int j = 0; j <= i; ++j, ++k) {
        if (i == j) {
          if (std::abs(x(k)) > kLogDiagMax) return kNegInf;
          chol_l(i, i) = std::exp(x(k));
        } else {
          chol_l(i, j) = x(k);
        }
      }
  }
  double zeta = 0.0, nu = nu_fixed_;
  if (!fix_nu_) {
    zeta = x(dim_ - 1);
    if (zeta > kZetaMax) return kNegInf;
    nu = nu_lb_ + std::exp(zeta);
  }

  const MatrixXd sigma = chol_l * chol_l.transpose();
  const MatrixXd l_inv = tri_inverse_lower(chol_l);
  const MatrixXd sigma_inv = l_inv.transpose() * l_inv;
  const double logdet_sigma = 2.0 * chol_l.diagonal().array().log().sum();
  if (!std::isfinite(logdet_sigma)) return kNegInf;

  const MatrixXd b = b0_ + lp_diag_.asDiagonal() * z * chol_l.transpose();

  // per-subject terms into fixed slots; summed in index order afterwards
  std::vector<double> logdet_a(S), tr_g_sigma(S);
  std::vector<MatrixXd> g_slot(S), cg_slot(S);
  std::vector<char> ok(S, 1);
  parallel_for(policy, S, [&](int s) {
    const auto& st = stats_[s];
    MatrixXd delta = b - st.e_mat;
    MatrixXd c = st.q_inv * delta;
    MatrixXd a = nu * sigma + st.r_mat + symmetrize(delta.transpose() * c);
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
      ok[s] = 0;
      return;
    }
    MatrixXd lower = llt.matrixL();
    logdet_a[s] = logdet_from_chol(lower);
    MatrixXd g = chol_inverse(lower);
    tr_g_sigma[s] = (g.array() * sigma.array()).sum();
    cg_slot[s] = c * g;
    g_slot[s] = std::move(g);
  });
  for (int s = 0; s < S; ++s)
    if (!ok[s]) return kNegInf;

  double sum_logdet_a = 0.0, sum_tr_g_sigma = 0.0;
  MatrixXd g_sum = MatrixXd::Zero(R_, R_);
  MatrixXd cg_sum = MatrixXd::Zero(q_, R_);
  for (int s = 0; s < S; ++s) {
    sum_logdet_a += logdet_a[s];
    sum_tr_g_sigma += tr_g_sigma[s];
    g_sum += g_slot[s];
    cg_sum += cg_slot[s];
  }

  const double logdet_nu_sigma = R_ * std::log(nu) + logdet_sigma;
  const double loglik = 0.5 * S * nu * logdet_nu_sigma +
                        S * (lmgamma(R_, 0.5 * (n_ + nu)) - lmgamma(R_, 0.5 * nu)) -
                        0.5 * (n_ + nu) * sum_logdet_a;

  const double prior_z = -0.5 * z.squaredNorm();
  const double tr_prior = (nu0_psi0_.array() * sigma_inv.array()).sum();
  const double prior_sigma =
      -0.5 * (nu0_ + R_ + 1) * logdet_sigma - 0.5 * tr_prior;

  double jac = R_ * std::log(2.0);
  for (int i = 0; i < R_; ++i)
    jac += (R_ - i + 1) * std::log(chol_l(i, i));
  if (!fix_nu_) jac += zeta;

  const double total = loglik + prior_z + prior_sigma + jac;
  if (!std::isfinite(total)) return kNegInf;

  if (parts) {
    parts->loglik = loglik;
    parts->log_prior = prior_z + prior_sigma;
    parts->jacobian = jac;
  }

  if (grad) {
    // d loglik / dB = -(n+nu) sum_s Qinv_s (B - E_s) A_s^{-1}
    MatrixXd grad_b = -(n_ + nu) * cg_sum;
    MatrixXd grad_z = lp_diag_.asDiagonal() * grad_b * chol_l - z;

    // symmetric-trace contributions, d tr(W dSigma) -> 2 W L in chol space
    MatrixXd w = 0.5 * sigma_inv * nu0_psi0_ * sigma_inv -
                 0.5 * (nu0_ + R_ + 1) * sigma_inv + 0.5 * S * nu * sigma_inv -
                 0.5 * (n_ + nu) * nu * g_sum;
    MatrixXd grad_l = 2.0 * w * chol_l +
                      grad_b.transpose() * lp_diag_.asDiagonal() * z;

    for (int i = 0; i < q_; ++i)
      for (int j = 0; j < R_; ++j) (*grad)(i * R_ + j) = grad_z(i, j);
    int k = q_ * R_;
    for (int i = 0; i < R_; ++i)
      for (int j = 0; j <= i; ++j, ++k) {
        if (i == j)
          (*grad)(k) = grad_l(i, i) * chol_l(i, i) + (R_ - i + 1);
        else
          (*grad)(k) = grad_l(i, j);
      }
    if (!fix_nu_) {
      double df_dnu = 0.5 * S * logdet_nu_sigma + 0.5 * S * R_ +
                      0.5 * S * (lmgamma_deriv(R_, 0.5 * (n_ + nu)) -
                                 lmgamma_deriv(R_, 0.5 * nu)) -
                      0.5 * sum_logdet_a - 0.5 * (n_ + nu) * sum_tr_g_sigma;
      (*grad)(dim_ - 1) = df_dnu * std::exp(zeta) + 1.0;
    }
  }
  return total;
}

PosteriorDraws nuts_fit(const LagDesign& design, const ShrinkagePrior& prior,
                        const HierFitOptions& opts, Exec policy) {
  if (opts.chains < 1) throw Error(Errc::validation, "need at least one chain");
  prior.validate();
  auto stats = subject_stats_all(design, prior, policy);
  // chains already parallelize the outer loop; keep per-subject terms serial
  // inside each chain unless a single chain runs alone
  Exec inner = opts.chains > 1 ? Exec::seq : policy;
  HierTarget target(std::move(stats), prior, design.n, opts.fix_nu, opts.nu_fixed,
                    inner);

  NutsOptions nuts_opts;
  nuts_opts.warmup = opts.warmup;
  nuts_opts.draws = opts.draws;
  nuts_opts.target_accept = opts.target_accept;
  nuts_opts.max_tree_depth = opts.max_tree_depth;

  PosteriorDraws out;
  out.model = 1;
  out.q = design.q;
  out.R = design.R;
  out.L = design.L;
  out.S = design.S;
  out.n = design.n;
  out.has_nu = true;
  out.region_labels = design.region_labels;
  out.seed = opts.seed;
  out.warmup = opts.warmup;
  out.chains.resize(opts.chains);

  LogDensityGrad fn = [&target](const VectorXd& x, VectorXd& g) {
    return target.logp_grad(x, g);
  };

  parallel_for(policy, opts.chains, [&](int c) {
    Rng rng = Rng::stream(opts.seed, static_cast<uint64_t>(c) + 1);

    // overdispersed start: Sigma prior-shaped (dof bumped so inits stay
    // finite-variance), coefficients near the prior mean, nu spread around
    // nu_lb + R
    HierParams init;
    init.Sigma = inverse_wishart_draw(
        rng, cholesky(MatrixXd(prior.nu0 * prior.Psi0), "nu0 Psi0", 0).lower,
        prior.nu0 + design.R);
    MatrixXd z0 = 0.5 * standard_normal_matrix(rng, design.q, design.R);
    init.B = prior.B0 + prior.p0_diag().cwiseInverse().cwiseSqrt().asDiagonal() *
                            z0 *
                            cholesky(init.Sigma, "init Sigma", 0).lower.transpose();
    init.nu = opts.fix_nu
                  ? opts.nu_fixed
                  : target.nu_lb() + (design.R + 1.0) * std::exp(0.5 * rng.normal());

    NutsResult res = nuts_run(fn, target.from_constrained(init), nuts_opts, rng);

    auto& chain = out.chains[c];
    chain.B.reserve(res.draws.size());
    chain.Sigma.reserve(res.draws.size());
    chain.nu.reserve(res.draws.size());
    for (const auto& xdraw : res.draws) {
      HierParams p = target.to_constrained(xdraw);
      chain.B.push_back(std::move(p.B));
      chain.Sigma.push_back(std::move(p.Sigma));
      chain.nu.push_back(p.nu);
    }
    chain.diag = res.diag;
  });
  return out;
}

}  // namespace hbvar
