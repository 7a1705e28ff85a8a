#pragma once

#include <cstddef>
#include <functional>

namespace lsmc {

/// Paths are grouped into fixed-size blocks; partial results are reduced in
/// block order so the output never depends on the worker count.
inline constexpr std::size_t kPathBlock = 4096;

/// Worker count used by parallel_for. Defaults to LSMC_THREADS or the
/// hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Runs body(i) for every i in [0, n). Each index runs exactly once; the
/// first exception thrown by any body is rethrown after all workers stop.
/// Calls made from inside a body run sequentially on that worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

inline std::size_t block_count(std::size_t n) { return (n + kPathBlock - 1) / kPathBlock; }

}  // namespace lsmc
