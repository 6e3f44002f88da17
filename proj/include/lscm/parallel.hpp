#pragma once

#include <cstddef>
#include <functional>

namespace lscm {

/// Number of workers to use for a request of `requested` (0 = hardware concurrency).
[[nodiscard]] std::size_t resolve_threads(std::size_t requested);

/**
 * Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
 * processed exactly once; callers write results into slot i so the outcome
 * does not depend on scheduling. The first exception thrown is rethrown.
 */
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace lscm
