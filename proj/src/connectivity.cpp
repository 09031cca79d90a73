#include "hbvar/connectivity.hpp"

#include <algorithm>
#include <cmath>

#include "hbvar/common.hpp"
#include "hbvar/diagnostics.hpp"
#include "hbvar/parallel.hpp"

namespace hbvar {

namespace {

struct Summary {
  double mean = 0.0, sd = 0.0, ci_low = 0.0, ci_high = 0.0;
  bool all_positive = false, all_negative = false;
};

Summary summarize(std::vector<double>& values, double ci_level) {
  Summary s;
  s.mean = mean(values);
  s.sd = values.size() > 1 ? std::sqrt(variance(values)) : 0.0;
  s.all_positive = std::all_of(values.begin(), values.end(), [](double v) { return v > 0; });
  s.all_negative = std::all_of(values.begin(), values.end(), [](double v) { return v < 0; });
  std::sort(values.begin(), values.end());
  double alpha = 0.5 * (1.0 - ci_level);
  s.ci_low = sorted_quantile(values, alpha);
  s.ci_high = sorted_quantile(values, 1.0 - alpha);
  return s;
}

bool retained(const Summary& s, const ThresholdRule& rule) {
  if (std::abs(s.mean) < rule.magnitude_floor) return false;
  if (rule.kind == ThresholdKind::all_draws_same_sign)
    return s.all_positive || s.all_negative;
  return s.ci_low > 0.0 || s.ci_high < 0.0;
}

void check_rules(const std::vector<ThresholdRule>& rules, int L) {
  if (static_cast<int>(rules.size()) != L)
    throw Error(Errc::validation, "need one threshold rule per lag");
}

std::vector<EcEdge> ec_from_series(
    int q, int R, int L,
    const std::function<double(int draw, int row, int col)>& value, int n_draws,
    const std::vector<ThresholdRule>& rules, Exec policy) {
  check_rules(rules, L);
  std::vector<std::optional<EcEdge>> slots(q * R);
  parallel_for(policy, q * R, [&](int idx) {
    const int row = idx / R, col = idx % R;
    const int lag = row / R + 1, from = row % R, to = col;
    std::vector<double> series(n_draws);
    for (int d = 0; d < n_draws; ++d) series[d] = value(d, row, col);
    Summary s = summarize(series, rules[lag - 1].ci_level);
    if (!retained(s, rules[lag - 1])) return;
    EcEdge e;
    e.from_region = from;
    e.to_region = to;
    e.lag = lag;
    e.mean = s.mean;
    e.sd = s.sd;
    e.ci_low = s.ci_low;
    e.ci_high = s.ci_high;
    e.positive = s.mean > 0;
    slots[idx] = e;
  });
  std::vector<EcEdge> edges;
  for (const auto& slot : slots)
    if (slot) edges.push_back(*slot);
  return edges;
}

std::vector<FcEdge> fc_from_series(
    int R, const std::function<double(int draw, int a, int b)>& corr, int n_draws,
    const ThresholdRule& rule, Exec policy) {
  const int n_pairs = R * (R - 1) / 2;
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(n_pairs);
  for (int a = 0; a < R; ++a)
    for (int b = a + 1; b < R; ++b) pairs.emplace_back(a, b);

  std::vector<std::optional<FcEdge>> slots(n_pairs);
  parallel_for(policy, n_pairs, [&](int idx) {
    auto [a, b] = pairs[idx];
    std::vector<double> series(n_draws);
    for (int d = 0; d < n_draws; ++d) series[d] = corr(d, a, b);
    Summary s = summarize(series, rule.ci_level);
    if (!retained(s, rule)) return;
    FcEdge e;
    e.region_a = a;
    e.region_b = b;
    e.mean = s.mean;
    e.sd = s.sd;
    e.ci_low = s.ci_low;
    e.ci_high = s.ci_high;
    e.positive = s.mean > 0;
    slots[idx] = e;
  });
  std::vector<FcEdge> edges;
  for (const auto& slot : slots)
    if (slot) edges.push_back(*slot);
  return edges;
}

double draw_correlation(const MatrixXd& sigma, int a, int b) {
  return sigma(a, b) / std::sqrt(sigma(a, a) * sigma(b, b));
}

void require_full_covariance(const PosteriorDraws& draws) {
  if (draws.model == 3)
    throw Error(Errc::unsupported_model,
                "Model 3 has a diagonal covariance matrix; functional "
                "connectivity is not estimable");
}

}  // namespace

std::vector<ThresholdRule> default_ec_rules(int L) {
  std::vector<ThresholdRule> rules(L);
  if (L >= 1) rules[0] = {ThresholdKind::all_draws_same_sign, 0.95, 0.0};
  for (int l = 2; l <= L; ++l) rules[l - 1] = {ThresholdKind::ci_excludes_zero, 0.95, 0.0};
  return rules;
}

std::vector<EcEdge> ec_extract(const PosteriorDraws& draws,
                               const std::vector<ThresholdRule>& rule_per_lag,
                               Exec policy) {
  return ec_from_series(
      draws.q, draws.R, draws.L,
      [&](int d, int row, int col) { return draws.b_draw(d)(row, col); },
      draws.total_draws(), rule_per_lag, policy);
}

std::vector<FcEdge> fc_extract(const PosteriorDraws& draws, const ThresholdRule& rule,
                               Exec policy) {
  require_full_covariance(draws);
  return fc_from_series(
      draws.R,
      [&](int d, int a, int b) { return draw_correlation(draws.sigma_draw(d), a, b); },
      draws.total_draws(), rule, policy);
}

std::vector<EcEdge> group_diff_ec(const PosteriorDraws& a, const PosteriorDraws& b,
                                  const std::vector<ThresholdRule>& rule_per_lag,
                                  Exec policy) {
  if (a.q != b.q || a.R != b.R || a.L != b.L)
    throw Error(Errc::dimension, "group difference requires identical dimensions");
  const int n = std::min(a.total_draws(), b.total_draws());
  return ec_from_series(
      a.q, a.R, a.L,
      [&](int d, int row, int col) {
        return a.b_draw(d)(row, col) - b.b_draw(d)(row, col);
      },
      n, rule_per_lag, policy);
}

std::vector<FcEdge> group_diff_fc(const PosteriorDraws& a, const PosteriorDraws& b,
                                  const ThresholdRule& rule, Exec policy) {
  require_full_covariance(a);
  require_full_covariance(b);
  if (a.R != b.R)
    throw Error(Errc::dimension, "group difference requires identical dimensions");
  const int n = std::min(a.total_draws(), b.total_draws());
  return fc_from_series(
      a.R,
      [&](int d, int x, int y) {
        return draw_correlation(a.sigma_draw(d), x, y) -
               draw_correlation(b.sigma_draw(d), x, y);
      },
      n, rule, policy);
}

std::vector<ScatterRow> summarize_scatter(const PosteriorDraws& a,
                                          const PosteriorDraws& b) {
  if (a.q != b.q || a.R != b.R)
    throw Error(Errc::dimension, "scatter comparison requires identical dimensions");
  std::vector<ScatterRow> rows;

  auto stats = [](std::vector<double>& v, double& m, double& sd) {
    m = mean(v);
    sd = v.size() > 1 ? std::sqrt(variance(v)) : 0.0;
  };

  for (int row = 0; row < a.q; ++row)
    for (int col = 0; col < a.R; ++col) {
      std::vector<double> va(a.total_draws()), vb(b.total_draws());
      for (int d = 0; d < a.total_draws(); ++d) va[d] = a.b_draw(d)(row, col);
      for (int d = 0; d < b.total_draws(); ++d) vb[d] = b.b_draw(d)(row, col);
      ScatterRow r;
      r.parameter = "ar_l" + std::to_string(row / a.R + 1) + "_from" +
                    std::to_string(row % a.R + 1) + "_to" + std::to_string(col + 1);
      stats(va, r.mean_a, r.sd_a);
      stats(vb, r.mean_b, r.sd_b);
      r.tratio_a = r.sd_a > 0 ? r.mean_a / r.sd_a : 0.0;
      r.tratio_b = r.sd_b > 0 ? r.mean_b / r.sd_b : 0.0;
      rows.push_back(std::move(r));
    }

  const bool corr_ok = a.model != 3 && b.model != 3;
  if (corr_ok) {
    for (int x = 0; x < a.R; ++x)
      for (int y = x + 1; y < a.R; ++y) {
        std::vector<double> va = correlation_series(a, x, y);
        std::vector<double> vb = correlation_series(b, x, y);
        ScatterRow r;
        r.parameter =
            "corr_" + std::to_string(x + 1) + "_" + std::to_string(y + 1);
        stats(va, r.mean_a, r.sd_a);
        stats(vb, r.mean_b, r.sd_b);
        r.tratio_a = r.sd_a > 0 ? r.mean_a / r.sd_a : 0.0;
        r.tratio_b = r.sd_b > 0 ? r.mean_b / r.sd_b : 0.0;
        rows.push_back(std::move(r));
      }
  }
  return rows;
}

VectorXd ec_region_weights(const std::vector<EcEdge>& edges, int R) {
  VectorXd w = VectorXd::Zero(R);
  for (const auto& e : edges) {
    w(e.from_region) += std::abs(e.mean);
    if (e.to_region != e.from_region) w(e.to_region) += std::abs(e.mean);
  }
  return w;
}

VectorXd fc_region_weights(const std::vector<FcEdge>& edges, int R) {
  VectorXd w = VectorXd::Zero(R);
  for (const auto& e : edges) {
    w(e.region_a) += std::abs(e.mean);
    w(e.region_b) += std::abs(e.mean);
  }
  return w;
}

std::vector<double> correlation_series(const PosteriorDraws& draws, int a, int b) {
  std::vector<double> out(draws.total_draws());
  for (int d = 0; d < draws.total_draws(); ++d)
    out[d] = draw_correlation(draws.sigma_draw(d), a, b);
  return out;
}

}  // namespace hbvar
