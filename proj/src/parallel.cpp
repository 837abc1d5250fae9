#include "crl/parallel.hpp"

namespace crl::par {

bool& enabled() {
  static bool on = true;
  return on;
}

int max_threads() {
#ifdef _OPENMP
  return enabled() ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

}  // namespace crl::par
