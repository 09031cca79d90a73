#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hbvar/linalg.hpp"

namespace hbvar {

enum class DofConvention { corrected, paper };

inline const char* to_string(DofConvention c) {
  return c == DofConvention::corrected ? "corrected" : "paper";
}

struct ChainDiagnostics {
  int divergences = 0;
  int post_warmup = 0;
  double step_size = 0.0;
  double mean_accept = 0.0;
  double mean_tree_depth = 0.0;
  int max_tree_depth_hits = 0;
};

struct ChainDraws {
  std::vector<MatrixXd> B;      // q x R each
  std::vector<MatrixXd> Sigma;  // R x R each
  std::vector<double> nu;       // empty for models 2/3
  ChainDiagnostics diag;
};

// Ordered posterior draws with chain/seed provenance; the one container all
// three models share.
struct PosteriorDraws {
  int model = 0;  // 1, 2 or 3
  int q = 0, R = 0, L = 0, S = 0, n = 0;
  bool has_nu = false;
  std::vector<std::string> region_labels;
  std::vector<ChainDraws> chains;
  uint64_t seed = 0;
  int warmup = 0;
  DofConvention dof_convention = DofConvention::corrected;

  int n_chains() const { return static_cast<int>(chains.size()); }
  int draws_per_chain() const {
    return chains.empty() ? 0 : static_cast<int>(chains.front().B.size());
  }
  int total_draws() const { return n_chains() * draws_per_chain(); }

  // chain-major flat access
  const MatrixXd& b_draw(int i) const {
    return chains[i / draws_per_chain()].B[i % draws_per_chain()];
  }
  const MatrixXd& sigma_draw(int i) const {
    return chains[i / draws_per_chain()].Sigma[i % draws_per_chain()];
  }
  double nu_draw(int i) const {
    return chains[i / draws_per_chain()].nu[i % draws_per_chain()];
  }

  int total_divergences() const {
    int d = 0;
    for (const auto& c : chains) d += c.diag.divergences;
    return d;
  }
  double divergence_fraction() const {
    int n_post = 0;
    for (const auto& c : chains) n_post += c.diag.post_warmup;
    return n_post == 0 ? 0.0 : static_cast<double>(total_divergences()) / n_post;
  }

  // Scalar-parameter view used by R-hat and the draw CSV writer: columns are
  // flattened B (row-major), then the lower triangle of Sigma (row-major,
  // diagonal included), then nu when present.
  std::vector<std::string> scalar_names() const;
  int n_scalars() const { return q * R + R * (R + 1) / 2 + (has_nu ? 1 : 0); }
  double scalar_value(int chain, int draw, int scalar_idx) const;

  MatrixXd mean_b() const;
  MatrixXd mean_sigma() const;
};

}  // namespace hbvar
