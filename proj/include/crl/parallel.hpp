#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace crl::par {

// Process-global switch between the OpenMP path and the serial reference
// path. Every parallel loop in this project writes per-index results and
// reduces them in index order afterwards, so the two paths are bit-identical
// (tests/parallel_test.cpp asserts this).
bool& enabled();

int max_threads();

// Runs f(0), ..., f(n-1). Indices may execute concurrently when the OpenMP
// path is active; f must only touch state owned by its index.
template <class F>
void for_index(std::size_t n, F&& f) {
#ifdef _OPENMP
  if (enabled() && n > 1) {
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      f(static_cast<std::size_t>(i));
    }
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) f(i);
}

}  // namespace crl::par
