#pragma once

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace anchorgae {

/// Worker count for row-parallel loops: ANCHORGAE_THREADS if set and positive,
/// otherwise the OpenMP default (1 without OpenMP).
inline int thread_count() {
  if (const char* env = std::getenv("ANCHORGAE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Runs fn(i) for i in [0, n). Iterations must write disjoint outputs.
/// Loops shorter than `grain` stay serial.
template <class Fn>
void parallel_for(long n, Fn&& fn, long grain = 256) {
#ifdef _OPENMP
  const int threads = thread_count();
  if (threads > 1 && n > grain) {
#pragma omp parallel for num_threads(threads) schedule(static)
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
#endif
  for (long i = 0; i < n; ++i) fn(i);
}

}  // namespace anchorgae
