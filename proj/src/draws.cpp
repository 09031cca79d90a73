#include "hbvar/draws.hpp"

namespace hbvar {

std::vector<std::string> PosteriorDraws::scalar_names() const {
  std::vector<std::string> names;
  names.reserve(n_scalars());
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < R; ++j)
      names.push_back("B_" + std::to_string(i) + "_" + std::to_string(j));
  for (int i = 0; i < R; ++i)
    for (int j = 0; j <= i; ++j)
      names.push_back("Sigma_" + std::to_string(i) + "_" + std::to_string(j));
  if (has_nu) names.push_back("nu");
  return names;
}

double PosteriorDraws::scalar_value(int chain, int draw, int scalar_idx) const {
  const auto& c = chains[chain];
  if (scalar_idx < q * R) return c.B[draw](scalar_idx / R, scalar_idx % R);
  int k = scalar_idx - q * R;
  if (k < R * (R + 1) / 2) {
    int i = 0;
    while (k > i) {
      k -= i + 1;
      ++i;
    }
    return c.Sigma[draw](i, k);
  }
  return c.nu[draw];
}

MatrixXd PosteriorDraws::mean_b() const {
  MatrixXd m = MatrixXd::Zero(q, R);
  int count = 0;
  for (const auto& c : chains)
    for (const auto& b : c.B) {
      m += b;
      ++count;
    }
  return m / count;
}

MatrixXd PosteriorDraws::mean_sigma() const {
  MatrixXd m = MatrixXd::Zero(R, R);
  int count = 0;
  for (const auto& c : chains)
    for (const auto& s : c.Sigma) {
      m += s;
      ++count;
    }
  return m / count;
}

}  // namespace hbvar
