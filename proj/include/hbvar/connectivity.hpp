#pragma once

#include <optional>

#include "hbvar/draws.hpp"
#include "hbvar/parallel.hpp"

namespace hbvar {

enum class ThresholdKind { all_draws_same_sign, ci_excludes_zero };

struct ThresholdRule {
  ThresholdKind kind = ThresholdKind::ci_excludes_zero;
  double ci_level = 0.95;
  double magnitude_floor = 0.0;  // on |posterior mean|
};

// Directed lagged connection (an AR coefficient surviving the threshold).
struct EcEdge {
  int from_region = 0;
  int to_region = 0;
  int lag = 0;
  double mean = 0.0, sd = 0.0, ci_low = 0.0, ci_high = 0.0;
  bool positive = false;
};

// Undirected contemporaneous connection (off-diagonal correlation of Sigma).
struct FcEdge {
  int region_a = 0;
  int region_b = 0;  // a < b
  double mean = 0.0, sd = 0.0, ci_low = 0.0, ci_high = 0.0;
  bool positive = false;
};

// Default per-lag EC rules: lag 1 keeps coefficients whose draws all share a
// sign; lag >= 2 keeps those whose 95% equal-tailed CI excludes zero.
std::vector<ThresholdRule> default_ec_rules(int L);
inline ThresholdRule default_fc_rule() {
  return {ThresholdKind::all_draws_same_sign, 0.95, 0.35};
}
inline ThresholdRule default_ec_diff_rule() {
  return {ThresholdKind::ci_excludes_zero, 0.95, 0.0};
}
inline ThresholdRule default_fc_diff_rule() {
  return {ThresholdKind::ci_excludes_zero, 0.95, 0.05};
}

std::vector<EcEdge> ec_extract(const PosteriorDraws& draws,
                               const std::vector<ThresholdRule>& rule_per_lag,
                               Exec policy = Exec::par);

// Requires a full covariance model; model 3 draws are rejected (diagonal
// covariance carries no functional connectivity).
std::vector<FcEdge> fc_extract(const PosteriorDraws& draws, const ThresholdRule& rule,
                               Exec policy = Exec::par);

// Group differences: draws are paired by index across the two independent
// posteriors (counts equalized by truncation) and the rule is applied to the
// difference sample a - b.
std::vector<EcEdge> group_diff_ec(const PosteriorDraws& a, const PosteriorDraws& b,
                                  const std::vector<ThresholdRule>& rule_per_lag,
                                  Exec policy = Exec::par);
std::vector<FcEdge> group_diff_fc(const PosteriorDraws& a, const PosteriorDraws& b,
                                  const ThresholdRule& rule, Exec policy = Exec::par);

// Figure-style comparison table of two fitted models: posterior mean, sd and
// mean/sd ratio for every AR coefficient and every correlation pair.
struct ScatterRow {
  std::string parameter;
  double mean_a = 0.0, mean_b = 0.0;
  double sd_a = 0.0, sd_b = 0.0;
  double tratio_a = 0.0, tratio_b = 0.0;
};

std::vector<ScatterRow> summarize_scatter(const PosteriorDraws& a,
                                          const PosteriorDraws& b);

// Sum of |mean| over retained edges incident to each region (the arc-length
// input any plotter needs).
VectorXd ec_region_weights(const std::vector<EcEdge>& edges, int R);
VectorXd fc_region_weights(const std::vector<FcEdge>& edges, int R);

// Per-draw correlation series for one region pair (exposed for tests).
std::vector<double> correlation_series(const PosteriorDraws& draws, int a, int b);

}  // namespace hbvar
