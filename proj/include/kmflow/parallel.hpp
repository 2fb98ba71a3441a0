#pragma once

#include <cstddef>

namespace kmflow {

// Execution policy for the per-node kernels. `serial` is the reference path
// kept for testing; `parallel` distributes nodes over OpenMP threads. Both
// evaluate the same expressions in the same order per node, so results are
// bit-identical.
enum class Exec { serial, parallel };

template <class F>
void for_each_node(Exec exec, std::size_t count, F&& body) {
  if (exec == Exec::parallel) {
    const long long n = static_cast<long long>(count);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) body(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < count; ++i) body(i);
  }
}

void set_thread_count(int threads);
int thread_count();

}  // namespace kmflow
