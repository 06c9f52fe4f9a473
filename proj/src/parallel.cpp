#include "oulab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace oulab {

namespace {

int initialThreads() {
  if (const char *env = std::getenv("OULAB_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) {
      return v;
    }
  }
  return 1;
}

std::atomic<int> &threadSetting() {
  static std::atomic<int> value{initialThreads()};
  return value;
}

} // namespace

int threadCount() { return threadSetting().load(); }

void setThreadCount(int threads) { threadSetting().store(std::max(1, threads)); }

void parallelFor(std::size_t count,
                 const std::function<void(std::size_t)> &body) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(threadCount()), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      body(i);
    }
    return;
  }
  std::exception_ptr failure;
  std::mutex failureMutex;
  std::vector<std::thread> pool;
  const std::size_t block = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t end = std::min(count, (w + 1) * block);
      try {
        for (std::size_t i = w * block; i < end; ++i) {
          body(i);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failureMutex);
        if (!failure) {
          failure = std::current_exception();
        }
      }
    });
  }
  for (auto &t : pool) {
    t.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

} // namespace oulab
