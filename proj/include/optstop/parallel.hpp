#pragma once

#include <cstddef>
#include <functional>

namespace optstop {

/// Process-wide worker count used by parallel_for. Defaults to 1.
void set_thread_count(unsigned threads);
unsigned thread_count();

/// Runs body(begin, end) over [0, count) split into contiguous blocks, one per
/// worker. Blocks write disjoint output, so results never depend on the
/// number of workers as long as reductions happen afterwards in index order.
/// The first exception thrown by any block is rethrown on the caller.
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_block = 1);

}  // namespace optstop
