#pragma once

#include <cstddef>
#include <functional>

namespace semdist {

// Upper bound on worker threads used by the per-record loops. Defaults to 1;
// the CLI sets it from SEMDIST_THREADS.
void set_max_threads(std::size_t n);
std::size_t max_threads();

// Reads SEMDIST_THREADS (if set and valid) and applies it.
void configure_threads_from_env();

// Sums body(begin, end) over fixed-size chunks of [0, n). Chunk boundaries do
// not depend on the thread count and partial sums are combined in chunk
// order, so the result is bit-identical for any number of threads.
double chunked_sum(std::size_t n,
                   const std::function<double(std::size_t, std::size_t)>& body,
                   std::size_t chunk = 1024);

}  // namespace semdist
