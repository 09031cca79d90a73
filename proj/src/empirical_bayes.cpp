#include "hbvar/empirical_bayes.hpp"

#include <algorithm>
#include <cmath>

namespace hbvar {

namespace {
const double kBad = -std::numeric_limits<double>::infinity();
}

NelderMeadResult nelder_mead_maximize(
    const std::function<double(const VectorXd&)>& objective, const VectorXd& start,
    double step, double rel_tolerance, int max_iter) {
  const int d = static_cast<int>(start.size());
  NelderMeadResult res;

  auto safe_eval = [&](const VectorXd& x) {
    ++res.evaluations;
    double v = objective(x);
    return std::isfinite(v) ? v : kBad;  // non-finite objective rejects the step
  };

  std::vector<VectorXd> xs(d + 1, start);
  std::vector<double> fs(d + 1);
  fs[0] = safe_eval(xs[0]);
  if (fs[0] == kBad)
    throw Error(Errc::numerical, "objective evaluation failed at the start point");
  for (int i = 0; i < d; ++i) {
    xs[i + 1](i) += step;
    fs[i + 1] = safe_eval(xs[i + 1]);
  }

  auto order = [&] {
    std::vector<int> idx(d + 1);
    for (int i = 0; i <= d; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] > fs[b]; });
    std::vector<VectorXd> xs2(d + 1);
    std::vector<double> fs2(d + 1);
    for (int i = 0; i <= d; ++i) {
      xs2[i] = xs[idx[i]];
      fs2[i] = fs[idx[i]];
    }
    xs.swap(xs2);
    fs.swap(fs2);
  };
  order();
  res.trace.emplace_back(0, fs[0]);

  for (int iter = 1; iter <= max_iter; ++iter) {
    res.iterations = iter;
    VectorXd centroid = VectorXd::Zero(d);
    for (int i = 0; i < d; ++i) centroid += xs[i];
    centroid /= d;

    VectorXd reflected = centroid + (centroid - xs[d]);
    double f_ref = safe_eval(reflected);

    if (f_ref > fs[0]) {
      VectorXd expanded = centroid + 2.0 * (centroid - xs[d]);
      double f_exp = safe_eval(expanded);
      if (f_exp > f_ref) {
        xs[d] = expanded;
        fs[d] = f_exp;
      } else {
        xs[d] = reflected;
        fs[d] = f_ref;
      }
    } else if (f_ref > fs[d - 1]) {
      xs[d] = reflected;
      fs[d] = f_ref;
    } else {
      bool outside = f_ref > fs[d];
      VectorXd contracted =
          outside ? centroid + 0.5 * (reflected - centroid)
                  : centroid + 0.5 * (xs[d] - centroid);
      double f_con = safe_eval(contracted);
      if (f_con > (outside ? f_ref : fs[d])) {
        xs[d] = contracted;
        fs[d] = f_con;
      } else {
        for (int i = 1; i <= d; ++i) {
          xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
          fs[i] = safe_eval(xs[i]);
        }
      }
    }
    order();
    if (fs[0] > res.trace.back().second) res.trace.emplace_back(iter, fs[0]);

    double spread = std::abs(fs[0] - fs[d]);
    double denom = std::max(1.0, std::abs(fs[0]));
    if (fs[d] != kBad && spread / denom < rel_tolerance) {
      res.converged = true;
      break;
    }
  }
  res.x = xs[0];
  res.value = fs[0];
  return res;
}

double tune_objective(const LagDesign& design, const VarianceSummary& summaries,
                      double lambda, const VectorXd& kappa, Exec policy) {
  ShrinkagePrior prior = build_prior_from_summaries(summaries, design.L, lambda, kappa);
  return log_marginal_likelihood(design, prior, policy).log_value;
}

namespace {

TuneResult run_stage(const LagDesign& design, const VarianceSummary& vs,
                     const VectorXd& start_log, const TuneConfig& config,
                     bool shared_kappa, Exec policy) {
  const int S = design.S;

  auto unpack = [&](const VectorXd& x, double& lambda, VectorXd& kappa) {
    lambda = std::exp(x(0));
    kappa.resize(S);
    if (shared_kappa)
      kappa.setConstant(std::exp(x(1)));
    else
      for (int s = 0; s < S; ++s) kappa(s) = std::exp(x(1 + s));
  };

  auto objective = [&](const VectorXd& x) {
    double lambda;
    VectorXd kappa;
    unpack(x, lambda, kappa);
    try {
      return tune_objective(design, vs, lambda, kappa, policy);
    } catch (const Error&) {
      return kBad;
    }
  };

  NelderMeadResult nm = nelder_mead_maximize(objective, start_log, config.simplex_step,
                                             config.rel_tolerance, config.max_iter);
  TuneResult out;
  unpack(nm.x, out.lambda, out.kappa);
  out.best_log_marginal = nm.value;
  out.trace = nm.trace;
  out.converged = nm.converged;
  out.termination = nm.converged ? TuneTermination::tolerance : TuneTermination::max_iter;
  out.evaluations = nm.evaluations;
  return out;
}

}  // namespace

TuneResult tune(const GroupDataset& dataset, int L, const TuneConfig& config,
                Exec policy) {
  LagDesign design = build_group_design(dataset, L, policy);
  VarianceSummary vs = sample_variance_summaries(dataset);
  const int S = design.S;

  if (config.two_stage) {
    VectorXd start2(2);
    start2 << std::log(config.start_lambda), std::log(config.start_kappa);
    TuneResult stage1 = run_stage(design, vs, start2, config, true, policy);

    VectorXd start_full(1 + S);
    start_full(0) = std::log(stage1.lambda);
    for (int s = 0; s < S; ++s) start_full(1 + s) = std::log(stage1.kappa(s));
    TuneResult stage2 = run_stage(design, vs, start_full, config, false, policy);
    // keep the better stage; the refinement can only be accepted if it improved
    if (stage2.best_log_marginal >= stage1.best_log_marginal) {
      stage2.evaluations += stage1.evaluations;
      return stage2;
    }
    return stage1;
  }

  VectorXd start(1 + S);
  start(0) = std::log(config.start_lambda);
  for (int s = 0; s < S; ++s) start(1 + s) = std::log(config.start_kappa);
  return run_stage(design, vs, start, config, false, policy);
}

}  // namespace hbvar
