#pragma once

#include <map>
#include <string>
#include <vector>

#include "hbvar/draws.hpp"

namespace hbvar {

// Split potential-scale-reduction factor. Each chain is halved, B/W are
// computed over the 2*m half-chains, and
//   Rhat = sqrt( ((n-1)/n W + B/n) / W ).
// NaN (with a warning on stderr) when the within-chain variance is zero.
double split_rhat(const std::vector<std::vector<double>>& chains);

struct RhatReport {
  std::map<std::string, double> values;
  double max_rhat = 0.0;
  bool any_nan = false;
};

// Split-Rhat for every scalar component of the draws (requires >= 2 chains
// and >= 4 draws per chain).
RhatReport rhat(const PosteriorDraws& draws);

// Effective sample size via Geyer's initial monotone positive sequence,
// pooled over chains. Used to turn MCMC means into MC standard errors.
double effective_sample_size(const std::vector<std::vector<double>>& chains);

double mean(const std::vector<double>& x);
double variance(const std::vector<double>& x);  // denominator n-1

// sd/sqrt(ESS) for one scalar across all chains of a draw set.
double mc_standard_error(const PosteriorDraws& draws, int scalar_idx);

}  // namespace hbvar
