#pragma once

#include <cstdint>
#include <exception>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hbvar {

// Execution policy for the data-parallel kernels. Every parallel kernel has a
// serial twin (Exec::seq) that produces bit-identical results; tests compare
// the two and the bench target times them.
enum class Exec { seq, par };

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Runs body(i) for i in [0, n). Bodies must write to disjoint slots; any
// reduction over the results happens afterwards in index order so that the
// parallel path reproduces the serial one exactly. The first exception thrown
// by a body is rethrown after the loop (exceptions must not cross an OpenMP
// region boundary).
template <typename F>
void parallel_for(Exec policy, int n, F&& body) {
  if (policy == Exec::par) {
#ifdef _OPENMP
    std::exception_ptr first_error = nullptr;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
#pragma omp critical(hbvar_parallel_for_error)
        if (!first_error) first_error = std::current_exception();
      }
    }
    if (first_error) std::rethrow_exception(first_error);
    return;
#endif
  }
  for (int i = 0; i < n; ++i) body(i);
}

}  // namespace hbvar
