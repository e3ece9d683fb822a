#pragma once

#include <functional>

namespace convmg {

/// Worker count: CONVMG_THREADS when set, hardware concurrency otherwise.
int thread_count();

/// Runs fn(0..n-1), possibly on several threads. Each index is executed
/// exactly once; callers own determinism by reducing results in index
/// order afterwards.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace convmg
