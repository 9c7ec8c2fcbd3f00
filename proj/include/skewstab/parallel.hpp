#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace skewstab {

// Execution policy for the cell-indexed kernels. Every kernel writes one
// output slot per index, so the parallel path produces bit-identical results
// to the serial one; the serial path is kept as the reference implementation
// for tests and benchmarks.
enum class Exec { serial, parallel };

template <class F>
void for_each_index(std::size_t n, Exec mode, F&& fn) {
#ifdef _OPENMP
  if (mode == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      fn(static_cast<std::size_t>(i));
    }
    return;
  }
#else
  (void)mode;
#endif
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

// Honors the SKEWSTAB_THREADS environment variable.
void apply_thread_cap();

int worker_count();

}  // namespace skewstab
