#pragma once

#include <functional>

#include "hbvar/draws.hpp"
#include "hbvar/linalg.hpp"
#include "hbvar/rng.hpp"

namespace hbvar {

// Log target with gradient. Returns -inf for invalid states (gradient output
// is then ignored); must never throw on rejectable states.
using LogDensityGrad = std::function<double(const VectorXd&, VectorXd&)>;

struct NutsOptions {
  int warmup = 200;
  int draws = 500;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  double divergence_threshold = 1000.0;  // max energy error before a transition diverges
  bool adapt_mass = true;
};

struct NutsResult {
  std::vector<VectorXd> draws;  // post-warmup positions
  ChainDiagnostics diag;
  VectorXd inv_mass;
};

// No-U-Turn sampler (recursive doubling with a slice variable), dual-averaging
// step-size adaptation toward target_accept, and expanding-window diagonal
// mass-matrix estimation during warmup. All randomness is drawn from the
// provided stream in a fixed order, so a chain is a pure function of
// (init, seed).
NutsResult nuts_run(const LogDensityGrad& target, const VectorXd& init,
                    const NutsOptions& opts, Rng& rng);

}  // namespace hbvar
