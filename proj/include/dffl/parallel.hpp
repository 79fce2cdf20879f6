#pragma once

#include <cstddef>
#include <cstdlib>
#include <cstring>

namespace dffl {

// Data-parallel kernels (per-sample loss evaluation, per-client round updates,
// Rademacher draws) run through parallel_for. The Serial mode executes the
// same body sequentially and is the reference the parallel path is tested
// against; kernels write to index-addressed slots and reduce in index order
// afterwards, so both modes produce bit-identical results.

enum class ExecMode { Serial, OpenMP };

/// Process-wide default: OpenMP when compiled in, unless DFFL_SERIAL=1 is set.
inline ExecMode default_exec_mode() {
#ifdef DFFL_HAVE_OPENMP
  const char* env = std::getenv("DFFL_SERIAL");
  if (env != nullptr && std::strcmp(env, "1") == 0) return ExecMode::Serial;
  return ExecMode::OpenMP;
#else
  return ExecMode::Serial;
#endif
}

template <typename Body>
void parallel_for(std::size_t n, const Body& body,
                  ExecMode mode = default_exec_mode()) {
#ifdef DFFL_HAVE_OPENMP
  if (mode == ExecMode::OpenMP) {
    #pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      body(static_cast<std::size_t>(i));
    }
    return;
  }
#else
  (void)mode;
#endif
  for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace dffl
