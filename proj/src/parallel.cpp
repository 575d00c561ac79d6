#include "fvs/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace fvs {

int DefaultThreadCount() {
  if (const char* env = std::getenv("FVS_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void ParallelFor(int begin, int end, int threads, const std::function<void(int, int)>& fn) {
  const int n = end - begin;
  if (n <= 0) return;
  threads = std::clamp(threads, 1, n);
  if (threads == 1) {
    fn(begin, end);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int b = begin + t * chunk;
    const int e = std::min(end, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&, t, b, e] {
      try {
        fn(b, e);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace fvs
