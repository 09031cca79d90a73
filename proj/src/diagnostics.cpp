#include "hbvar/diagnostics.hpp"

#include <cmath>
#include <iostream>

#include "hbvar/common.hpp"

namespace hbvar {

double mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(const std::vector<double>& x) {
  if (x.size() < 2) throw Error(Errc::validation, "variance needs >= 2 values");
  double m = mean(x), s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw Error(Errc::validation, "Rhat needs >= 2 chains");
  size_t len = chains.front().size();
  for (const auto& c : chains) len = std::min(len, c.size());
  if (len < 4) throw Error(Errc::validation, "Rhat needs >= 4 draws per chain");
  const size_t half = len / 2;

  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    halves.emplace_back(c.begin(), c.begin() + half);
    halves.emplace_back(c.begin() + half, c.begin() + 2 * half);
  }
  const double m = static_cast<double>(halves.size());
  const double n = static_cast<double>(half);

  std::vector<double> means;
  double w = 0.0;
  for (const auto& h : halves) {
    means.push_back(mean(h));
    w += variance(h) / m;
  }
  if (w <= 0.0) {
    std::cerr << "warning: zero within-chain variance, Rhat undefined\n";
    return std::numeric_limits<double>::quiet_NaN();
  }
  double b = n * variance(means);
  double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

RhatReport rhat(const PosteriorDraws& draws) {
  if (draws.n_chains() < 2)
    throw Error(Errc::validation, "Rhat needs >= 2 chains");
  RhatReport report;
  auto names = draws.scalar_names();
  const int n = draws.draws_per_chain();
  for (int p = 0; p < draws.n_scalars(); ++p) {
    std::vector<std::vector<double>> series(draws.n_chains());
    bool constant_everywhere = true;
    const double first = draws.scalar_value(0, 0, p);
    for (int c = 0; c < draws.n_chains(); ++c) {
      series[c].resize(n);
      for (int d = 0; d < n; ++d) {
        series[c][d] = draws.scalar_value(c, d, p);
        constant_everywhere = constant_everywhere && series[c][d] == first;
      }
    }
    if (constant_everywhere) continue;  // clamped parameter, not sampled
    double r = split_rhat(series);
    report.values[names[p]] = r;
    if (std::isnan(r))
      report.any_nan = true;
    else
      report.max_rhat = std::max(report.max_rhat, r);
  }
  return report;
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  const int m = static_cast<int>(chains.size());
  size_t len = chains.front().size();
  for (const auto& c : chains) len = std::min(len, c.size());
  const int n = static_cast<int>(len);
  if (n < 4) throw Error(Errc::validation, "ESS needs >= 4 draws");

  std::vector<double> chain_means(m), chain_vars(m);
  for (int c = 0; c < m; ++c) {
    std::vector<double> trimmed(chains[c].begin(), chains[c].begin() + n);
    chain_means[c] = mean(trimmed);
    chain_vars[c] = variance(trimmed);
  }
  double w = mean(chain_vars);
  double var_plus = w * (n - 1.0) / n;
  if (m > 1) var_plus += variance(chain_means);
  if (var_plus <= 0.0) return static_cast<double>(m) * n;

  // pooled autocovariance at each lag
  auto acov = [&](int lag) {
    double s = 0.0;
    for (int c = 0; c < m; ++c) {
      double acc = 0.0;
      for (int t = 0; t + lag < n; ++t)
        acc += (chains[c][t] - chain_means[c]) * (chains[c][t + lag] - chain_means[c]);
      s += acc / n;
    }
    return s / m;
  };

  double rho_sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (int lag = 1; lag + 1 < n; lag += 2) {
    double rho_a = 1.0 - (w - acov(lag)) / var_plus;
    double rho_b = 1.0 - (w - acov(lag + 1)) / var_plus;
    double pair = rho_a + rho_b;
    if (pair < 0.0) break;           // initial positive sequence
    pair = std::min(pair, prev_pair); // monotone correction
    prev_pair = pair;
    rho_sum += pair;
  }
  double tau = 1.0 + 2.0 * rho_sum;
  double ess = static_cast<double>(m) * n / tau;
  return std::min(ess, static_cast<double>(m) * n);
}

double mc_standard_error(const PosteriorDraws& draws, int scalar_idx) {
  const int n = draws.draws_per_chain();
  std::vector<std::vector<double>> series(draws.n_chains());
  std::vector<double> all;
  for (int c = 0; c < draws.n_chains(); ++c) {
    series[c].resize(n);
    for (int d = 0; d < n; ++d) {
      series[c][d] = draws.scalar_value(c, d, scalar_idx);
      all.push_back(series[c][d]);
    }
  }
  double sd = std::sqrt(variance(all));
  double ess = effective_sample_size(series);
  return sd / std::sqrt(std::max(ess, 1.0));
}

}  // namespace hbvar
