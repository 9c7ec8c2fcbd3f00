#include "skewstab/parallel.hpp"

#include <cstdlib>
#include <string>

namespace skewstab {

void apply_thread_cap() {
#ifdef _OPENMP
  if (const char* cap = std::getenv("SKEWSTAB_THREADS")) {
    try {
      int n = std::stoi(cap);
      if (n > 0) omp_set_num_threads(n);
    } catch (...) {
      // ignore malformed values, keep the OpenMP default
    }
  }
#endif
}

int worker_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace skewstab
