#pragma once

#include <cstddef>
#include <functional>

namespace riskhjb {

/// Worker threads used by the library. Resolution order: the value set via
/// set_worker_count (if > 0), then RISK_HJB_WORKERS, then the hardware count.
int worker_count();
void set_worker_count(int workers);

/// Calls body(begin, end) on contiguous chunks covering [0, n). Chunks are
/// split statically, so which index lands on which thread never affects
/// results written per index. Exceptions from the body are rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace riskhjb
