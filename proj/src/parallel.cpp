#include "semdist/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace semdist {
namespace {
std::atomic<std::size_t> g_max_threads{1};
}

void set_max_threads(std::size_t n) { g_max_threads = std::max<std::size_t>(1, n); }

std::size_t max_threads() { return g_max_threads; }

void configure_threads_from_env() {
  const char* env = std::getenv("SEMDIST_THREADS");
  if (env == nullptr) return;
  try {
    const long v = std::stol(env);
    if (v > 0) set_max_threads(static_cast<std::size_t>(v));
  } catch (const std::exception&) {
    // unparsable values leave the default in place
  }
}

double chunked_sum(std::size_t n,
                   const std::function<double(std::size_t, std::size_t)>& body,
                   std::size_t chunk) {
  if (n == 0) return 0.0;
  chunk = std::max<std::size_t>(1, chunk);
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  std::vector<double> partial(n_chunks, 0.0);
  auto run = [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    partial[c] = body(begin, std::min(n, begin + chunk));
  };

  const std::size_t workers = std::min(max_threads(), n_chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < n_chunks; c = next++) run(c);
      });
    }
    for (auto& t : pool) t.join();
  }

  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace semdist
