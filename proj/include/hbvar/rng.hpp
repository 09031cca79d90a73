#pragma once

#include <cstdint>
#include <random>

namespace hbvar {

// Deterministic random stream. The engine is std::mt19937_64 (pinned by the
// standard); all variate transforms are implemented here rather than through
// std:: distributions so draw sequences are identical across standard library
// versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  // Independent substream: splitmix64 of (seed, stream) so that e.g. chain c
  // or simulated subject s gets its own reproducible stream.
  static Rng stream(uint64_t seed, uint64_t stream_id);

  double uniform();                       // [0, 1)
  double normal();                        // N(0, 1), Marsaglia polar
  double gamma(double shape, double scale);
  double chi_square(double dof) { return gamma(0.5 * dof, 2.0); }
  double inverse_gamma(double shape, double scale_param);  // density ~ x^{-a-1} e^{-b/x}
  uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace hbvar
