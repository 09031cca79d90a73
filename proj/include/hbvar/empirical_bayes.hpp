#pragma once

#include "hbvar/conjugate.hpp"

namespace hbvar {

enum class TuneTermination { tolerance, max_iter, failure };

struct TuneResult {
  double lambda = 0.0;
  VectorXd kappa;
  double best_log_marginal = 0.0;
  std::vector<std::pair<int, double>> trace;  // (iteration, best so far)
  bool converged = false;
  TuneTermination termination = TuneTermination::failure;
  int evaluations = 0;
};

struct TuneConfig {
  double start_lambda = 0.2;
  double start_kappa = 0.2;
  double rel_tolerance = 1e-6;
  int max_iter = 2000;
  double simplex_step = 0.4;  // in log-parameter space
  bool two_stage = false;     // shared kappa first, then per-subject refinement
};

// Empirical-Bayes choice of (lambda, kappa_1..kappa_S): Nelder-Mead over the
// log-parameters maximizing the common-covariance log marginal likelihood;
// the result feeds build_default_prior for all three models.
TuneResult tune(const GroupDataset& dataset, int L, const TuneConfig& config = {},
                Exec policy = Exec::par);

// The tuning objective at explicit hyperparameters (used by the grid oracle
// and by re-evaluation tests): log marginal likelihood at the default prior
// built from the precomputed variance summaries with (lambda, kappa).
double tune_objective(const LagDesign& design, const VarianceSummary& summaries,
                      double lambda, const VectorXd& kappa,
                      Exec policy = Exec::par);

// Generic Nelder-Mead maximizer (reflection 1, expansion 2, contraction 0.5,
// shrink 0.5). Non-finite objective values reject the step.
struct NelderMeadResult {
  VectorXd x;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  std::vector<std::pair<int, double>> trace;
};

NelderMeadResult nelder_mead_maximize(
    const std::function<double(const VectorXd&)>& objective, const VectorXd& start,
    double step, double rel_tolerance, int max_iter);

}  // namespace hbvar
