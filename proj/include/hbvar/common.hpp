#pragma once

#include <stdexcept>
#include <string>

namespace hbvar {

// Error categories map onto CLI exit codes: validation/dimension problems
// exit 2, numerical failures exit 3, convergence warnings exit 4.
enum class Errc {
  validation,
  dimension,
  degenerate_prior,
  conditioning,
  numerical,
  improper_posterior,
  unsupported_model,
  unreliable_estimate,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

inline int exit_code_for(Errc c) {
  switch (c) {
    case Errc::validation:
    case Errc::dimension:
    case Errc::degenerate_prior:
    case Errc::io:
      return 2;
    default:
      return 3;
  }
}

inline const char* version_string() { return "0.1.0"; }

}  // namespace hbvar
