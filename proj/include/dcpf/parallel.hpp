#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dcpf {

// Batch kernels take an ExecPolicy so the serial path stays available as a
// reference; tests assert both produce identical bytes. Every parallel loop
// in this codebase writes disjoint output slots, so results do not depend on
// the thread count.
enum class ExecPolicy { Serial, Parallel };

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// resolve a config thread count: 0 = hardware, n >= 1 = exactly n
inline int resolve_threads(int requested) {
  if (requested <= 0) return hardware_threads();
  return requested;
}

template <typename Fn>
void parallel_for(int n, ExecPolicy policy, Fn&& fn) {
#ifdef _OPENMP
  if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
#else
  (void)policy;
#endif
  for (int i = 0; i < n; ++i) fn(i);
}

template <typename Fn>
void parallel_for_threads(int n, int threads, Fn&& fn) {
#ifdef _OPENMP
  if (threads != 1) {
#pragma omp parallel for schedule(static) num_threads(resolve_threads(threads))
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
#endif
  for (int i = 0; i < n; ++i) fn(i);
}

}  // namespace dcpf
