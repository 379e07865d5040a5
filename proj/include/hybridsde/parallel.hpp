#pragma once

#include <cstddef>
#include <functional>

namespace hsde {

/// Runs body(k) for k in [0, n) on up to `workers` threads, handing out
/// indices in chunks. Every index is visited exactly once; callers store
/// results in per-index slots and reduce afterwards in index order.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body,
                  std::size_t chunk = 256);

}  // namespace hsde
