// Times the OpenMP kernels against their serial reference paths on a
// medium-sized synthetic problem and prints a speedup table.

#include <chrono>
#include <cstdio>

#include "hbvar/hier_sampler.hpp"
#include "hbvar/model_eval.hpp"
#include "hbvar/simulate.hpp"

using namespace hbvar;

namespace {

template <typename F>
double time_ms(F&& fn, int reps) {
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s %10.2f ms %10.2f ms %8.2fx\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main() {
  const int R = 8, S = 48, T = 200, L = 2;
  GeneratorSpec spec;
  spec.R = R;
  spec.S = S;
  spec.T = T;
  spec.L = L;
  spec.nu = R + 10;
  spec.seed = 7;
  spec.Sigma = 0.5 * MatrixXd::Identity(R, R);
  spec.B = MatrixXd::Zero(L * R, R);
  spec.B.diagonal().setConstant(0.25);
  spec.ps_diag.assign(S, VectorXd::Constant(L * R, 400.0));
  SimulatedGroup sim = generate(spec, Exec::par);

  LagDesign design = build_group_design(sim.dataset, L, Exec::seq);
  ShrinkagePrior prior = build_default_prior(
      sim.dataset, L, 0.2, VectorXd::Constant(S, 0.2));

  std::printf("%d threads available\n", hardware_threads());
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

  report("subject_stats_all",
         time_ms([&] { subject_stats_all(design, prior, Exec::seq); }, 5),
         time_ms([&] { subject_stats_all(design, prior, Exec::par); }, 5));

  auto stats = subject_stats_all(design, prior, Exec::par);

  {
    HierTarget target_seq(stats, prior, design.n, false, 0.0, Exec::seq);
    HierTarget target_par(stats, prior, design.n, false, 0.0, Exec::par);
    HierParams p;
    p.B = prior.B0;
    p.Sigma = prior.Psi0;
    p.nu = R + 6.0;
    VectorXd x = target_seq.from_constrained(p);
    VectorXd grad(target_seq.dim());
    report("log_target_grad",
           time_ms([&] { target_seq.logp_grad(x, grad); }, 50),
           time_ms([&] { target_par.logp_grad(x, grad); }, 50));
  }

  {
    ConjugatePosterior post = combine(stats, prior, design.n);
    PosteriorDraws draws = sample_model2(post, 400, 11);
    draws.L = L;
    report("pointwise_loglik",
           time_ms([&] { pointwise_loglik(draws, stats, design.n, Exec::seq); }, 3),
           time_ms([&] { pointwise_loglik(draws, stats, design.n, Exec::par); }, 3));
  }

  report("mc_subject_integral",
         time_ms([&] {
           mc_subject_integral(design.subjects[0], prior, 0, prior.B0, prior.Psi0,
                               20000, 3, Exec::seq);
         }, 3),
         time_ms([&] {
           mc_subject_integral(design.subjects[0], prior, 0, prior.B0, prior.Psi0,
                               20000, 3, Exec::par);
         }, 3));

  report("generate",
         time_ms([&] { generate(spec, Exec::seq); }, 3),
         time_ms([&] { generate(spec, Exec::par); }, 3));

  return 0;
}
