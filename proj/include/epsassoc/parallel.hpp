#pragma once

#include <cstddef>
#include <functional>

namespace epsassoc {

// Worker count from EPS_ASSOC_WORKERS, else the hardware concurrency.
int default_worker_count();

// Runs body(i) for i in [0, count) on up to `workers` threads. Indices are
// handed out dynamically; callers write results into slot i so the outcome
// does not depend on scheduling. The first exception is rethrown after all
// workers stop.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

}  // namespace epsassoc
