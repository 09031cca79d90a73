#include "hbvar/nuts.hpp"

#include <cmath>

#include "hbvar/common.hpp"

namespace hbvar {

namespace {

struct Phase {
  VectorXd theta;
  VectorXd momentum;
  VectorXd grad;
  double logp = 0.0;
};

struct DualAveraging {
  double mu = 0.0, log_eps = 0.0, log_eps_bar = 0.0, h_bar = 0.0;
  double gamma = 0.05, t0 = 10.0, kappa = 0.75;
  int m = 0;

  void reset(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = 0.0;
    h_bar = 0.0;
    m = 0;
  }
  void update(double accept_stat, double target) {
    ++m;
    double eta = 1.0 / (m + t0);
    h_bar = (1.0 - eta) * h_bar + eta * (target - accept_stat);
    log_eps = mu - std::sqrt(static_cast<double>(m)) / gamma * h_bar;
    double w = std::pow(static_cast<double>(m), -kappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
  }
  double eps() const { return std::exp(log_eps); }
  double eps_bar() const { return std::exp(log_eps_bar); }
};

class Sampler {
 public:
  Sampler(const LogDensityGrad& target, const NutsOptions& opts, Rng& rng, int dim)
      : target_(target), opts_(opts), rng_(rng), dim_(dim),
        inv_mass_(VectorXd::Ones(dim)), mass_sqrt_(VectorXd::Ones(dim)) {}

  NutsResult run(const VectorXd& init);

 private:
  double kinetic(const VectorXd& r) const {
    return 0.5 * (r.array().square() * inv_mass_.array()).sum();
  }

  // one leapfrog step of size eps in place; returns the new log density
  double leapfrog(Phase& z, double eps) {
    z.momentum += 0.5 * eps * z.grad;
    z.theta.array() += eps * inv_mass_.array() * z.momentum.array();
    double logp = target_(z.theta, z.grad);
    if (std::isfinite(logp)) z.momentum += 0.5 * eps * z.grad;
    z.logp = logp;
    return logp;
  }

  struct Tree {
    Phase minus, plus, proposal;
    double n_accept = 0.0;  // slice-acceptable states in the subtree
    bool keep_going = true;
    double alpha_sum = 0.0;
    int n_alpha = 0;
    bool divergent = false;
  };

  bool no_u_turn(const Phase& minus, const Phase& plus) const {
    VectorXd span = plus.theta - minus.theta;
    double fwd = span.dot((inv_mass_.array() * plus.momentum.array()).matrix());
    double bwd = span.dot((inv_mass_.array() * minus.momentum.array()).matrix());
    return fwd >= 0.0 && bwd >= 0.0;
  }

  Tree build_tree(const Phase& z, double log_u, int direction, int depth,
                  double eps, double joint0) {
    if (depth == 0) {
      Tree leaf;
      Phase z1 = z;
      double logp = leapfrog(z1, direction * eps);
      double joint = std::isfinite(logp) ? logp - kinetic(z1.momentum)
                                         : -std::numeric_limits<double>::infinity();
      leaf.minus = z1;
      leaf.plus = z1;
      leaf.proposal = std::move(z1);
      leaf.n_accept = (log_u <= joint) ? 1.0 : 0.0;
      leaf.keep_going = log_u < joint + opts_.divergence_threshold;
      leaf.divergent = !leaf.keep_going;
      leaf.alpha_sum = std::isfinite(joint) ? std::min(1.0, std::exp(joint - joint0)) : 0.0;
      leaf.n_alpha = 1;
      return leaf;
    }
    Tree inner = build_tree(z, log_u, direction, depth - 1, eps, joint0);
    if (!inner.keep_going) return inner;

    Tree outer = build_tree(direction == -1 ? inner.minus : inner.plus, log_u,
                            direction, depth - 1, eps, joint0);
    if (direction == -1)
      inner.minus = outer.minus;
    else
      inner.plus = outer.plus;

    double total = inner.n_accept + outer.n_accept;
    if (outer.n_accept > 0.0 && rng_.uniform() < outer.n_accept / total)
      inner.proposal = outer.proposal;
    inner.n_accept = total;
    inner.alpha_sum += outer.alpha_sum;
    inner.n_alpha += outer.n_alpha;
    inner.divergent = inner.divergent || outer.divergent;
    inner.keep_going = outer.keep_going && no_u_turn(inner.minus, inner.plus);
    return inner;
  }

  // Heuristic initial step size: double/halve until the one-step acceptance
  // ratio crosses 1/2.
  double find_initial_eps(const Phase& z0) {
    double eps = 1.0;
    Phase z = z0;
    for (int i = 0; i < dim_; ++i) z.momentum(i) = rng_.normal() * mass_sqrt_(i);
    double joint0 = z.logp - kinetic(z.momentum);
    Phase z1 = z;
    double logp = leapfrog(z1, eps);
    double joint = std::isfinite(logp) ? logp - kinetic(z1.momentum)
                                       : -std::numeric_limits<double>::infinity();
    while (!std::isfinite(joint) && eps > 1e-10) {
      eps *= 0.5;
      z1 = z;
      logp = leapfrog(z1, eps);
      joint = std::isfinite(logp) ? logp - kinetic(z1.momentum)
                                  : -std::numeric_limits<double>::infinity();
    }
    double dir = (joint - joint0 > std::log(0.5)) ? 1.0 : -1.0;
    for (int iter = 0; iter < 60; ++iter) {
      eps *= std::pow(2.0, dir);
      z1 = z;
      logp = leapfrog(z1, eps);
      joint = std::isfinite(logp) ? logp - kinetic(z1.momentum)
                                  : -std::numeric_limits<double>::infinity();
      double delta = joint - joint0;
      if (dir > 0 ? delta <= std::log(0.5) : delta >= std::log(0.5)) break;
      if (eps > 1e7 || eps < 1e-10) break;
    }
    return std::max(eps, 1e-10);
  }

  const LogDensityGrad& target_;
  const NutsOptions& opts_;
  Rng& rng_;
  int dim_;
  VectorXd inv_mass_;
  VectorXd mass_sqrt_;
};

NutsResult Sampler::run(const VectorXd& init) {
  Phase current;
  current.theta = init;
  current.grad.resize(dim_);
  current.momentum = VectorXd::Zero(dim_);
  current.logp = target_(current.theta, current.grad);
  if (!std::isfinite(current.logp))
    throw Error(Errc::numerical, "NUTS initial state has non-finite log density");

  // warmup schedule: step-size-only buffers around expanding variance windows
  int init_buffer = 75, term_buffer = 50, base_window = 25;
  if (opts_.warmup < init_buffer + term_buffer + base_window) {
    init_buffer = std::max(1, static_cast<int>(0.15 * opts_.warmup));
    term_buffer = std::max(1, static_cast<int>(0.10 * opts_.warmup));
    base_window = std::max(1, opts_.warmup - init_buffer - term_buffer);
  }
  int window_end = std::min(init_buffer + base_window, opts_.warmup - term_buffer);
  int window_size = base_window;

  // Welford accumulators for the current variance window
  VectorXd welford_mean = VectorXd::Zero(dim_);
  VectorXd welford_m2 = VectorXd::Zero(dim_);
  int welford_n = 0;

  double eps = find_initial_eps(current);
  DualAveraging da;
  da.reset(eps);

  NutsResult result;
  result.draws.reserve(opts_.draws);

  const int total = opts_.warmup + opts_.draws;
  for (int iter = 0; iter < total; ++iter) {
    const bool warming = iter < opts_.warmup;
    eps = warming ? da.eps() : da.eps_bar();

    for (int i = 0; i < dim_; ++i)
      current.momentum(i) = rng_.normal() * mass_sqrt_(i);
    double joint0 = current.logp - kinetic(current.momentum);
    double log_u = joint0 + std::log(rng_.uniform());

    Phase minus = current, plus = current;
    Phase proposal = current;
    double n_accept = 1.0;
    bool keep_going = true;
    bool divergent = false;
    double alpha_sum = 0.0;
    int n_alpha = 0;
    int depth = 0;

    while (keep_going && depth < opts_.max_tree_depth) {
      int direction = rng_.uniform() < 0.5 ? -1 : 1;
      Tree subtree = build_tree(direction == -1 ? minus : plus, log_u, direction,
                                depth, eps, joint0);
      if (direction == -1)
        minus = subtree.minus;
      else
        plus = subtree.plus;

      if (subtree.keep_going && subtree.n_accept > 0.0 &&
          rng_.uniform() < subtree.n_accept / n_accept)
        proposal = subtree.proposal;
      if (subtree.keep_going) n_accept += subtree.n_accept;

      alpha_sum += subtree.alpha_sum;
      n_alpha += subtree.n_alpha;
      divergent = divergent || subtree.divergent;
      keep_going = subtree.keep_going && no_u_turn(minus, plus);
      ++depth;
    }
    current = proposal;

    double accept_stat = n_alpha > 0 ? alpha_sum / n_alpha : 0.0;
    if (warming) {
      da.update(accept_stat, opts_.target_accept);

      if (opts_.adapt_mass && iter >= init_buffer && iter < opts_.warmup - term_buffer) {
        ++welford_n;
        VectorXd delta = current.theta - welford_mean;
        welford_mean += delta / welford_n;
        welford_m2.array() += delta.array() * (current.theta - welford_mean).array();

        if (iter + 1 == window_end) {
          if (welford_n > 1) {
            double n_d = welford_n;
            VectorXd var = welford_m2 / (n_d - 1.0);
            inv_mass_ = (n_d / (n_d + 5.0)) * var.array() + 1e-3 * (5.0 / (n_d + 5.0));
            mass_sqrt_ = inv_mass_.cwiseInverse().cwiseSqrt();
          }
          welford_mean.setZero();
          welford_m2.setZero();
          welford_n = 0;
          window_size *= 2;
          int next_end = window_end + window_size;
          if (next_end + 2 * window_size > opts_.warmup - term_buffer)
            next_end = opts_.warmup - term_buffer;
          window_end = next_end;
          eps = find_initial_eps(current);
          da.reset(eps);
        }
      }
    } else {
      result.draws.push_back(current.theta);
      ++result.diag.post_warmup;
      if (divergent) ++result.diag.divergences;
      result.diag.mean_accept += accept_stat;
      result.diag.mean_tree_depth += depth;
      if (depth >= opts_.max_tree_depth) ++result.diag.max_tree_depth_hits;
    }
  }

  if (opts_.draws > 0) {
    result.diag.mean_accept /= opts_.draws;
    result.diag.mean_tree_depth /= opts_.draws;
  }
  result.diag.step_size = da.eps_bar();
  result.inv_mass = inv_mass_;
  return result;
}

}  // namespace

NutsResult nuts_run(const LogDensityGrad& target, const VectorXd& init,
                    const NutsOptions& opts, Rng& rng) {
  Sampler sampler(target, opts, rng, static_cast<int>(init.size()));
  return sampler.run(init);
}

}  // namespace hbvar
