#pragma once

#include <cstddef>
#include <functional>

namespace qfedtd {

/// Thread count from `requested`, else $QFEDTD_THREADS, else 1.
std::size_t resolve_thread_count(std::size_t requested);

/// Runs body(i) for i in [0, count) on up to `threads` workers. Work items
/// must write only to their own output slot; the first exception thrown by
/// any item is rethrown after all workers join.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace qfedtd
