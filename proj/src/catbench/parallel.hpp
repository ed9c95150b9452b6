#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace catbench::kernels {

enum class Schedule { static_blocked, static_chunked, dynamic, guided };

// Persistent workers; run() executes task(w) for w in [0, threads) with the
// caller acting as worker 0. Not reentrant.
class WorkerPool {
 public:
  static WorkerPool &instance();

  ~WorkerPool();
  void run(int threads, const std::function<void(int)> &task);

 private:
  WorkerPool() = default;
  void ensure(int workers);
  void loop(int id);

  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  std::vector<std::thread> workers_;
  const std::function<void(int)> *task_ = nullptr;
  int active_ = 0;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

// Splits [0, n) into ranges and hands them to fn(begin, end). chunk == 0
// under static scheduling gives each worker one contiguous block.
template <class Fn>
void parallel_for(int threads, std::int64_t n, Schedule schedule, std::int64_t chunk, Fn &&fn) {
  if (n <= 0) return;
  if (threads < 1) threads = 1;
  if (schedule == Schedule::static_chunked && chunk <= 0) schedule = Schedule::static_blocked;
  if (threads == 1 && schedule == Schedule::static_blocked) {
    fn(std::int64_t{0}, n);
    return;
  }
  const std::int64_t step = chunk > 0 ? chunk : 1;
  std::atomic<std::int64_t> next{0};
  auto body = [&](int w) {
    switch (schedule) {
      case Schedule::static_blocked: {
        const std::int64_t lo = n * w / threads;
        const std::int64_t hi = n * (w + 1) / threads;
        if (lo < hi) fn(lo, hi);
        break;
      }
      case Schedule::static_chunked:
        for (std::int64_t lo = step * w; lo < n; lo += step * threads)
          fn(lo, std::min(n, lo + step));
        break;
      case Schedule::dynamic:
        for (;;) {
          const std::int64_t lo = next.fetch_add(step);
          if (lo >= n) break;
          fn(lo, std::min(n, lo + step));
        }
        break;
      case Schedule::guided:
        for (;;) {
          std::int64_t lo = next.load();
          std::int64_t size = 0;
          do {
            if (lo >= n) return;
            size = std::max(step, (n - lo) / (2 * threads));
          } while (!next.compare_exchange_weak(lo, lo + size));
          fn(lo, std::min(n, lo + size));
        }
        break;
    }
  };
  if (threads == 1) {
    body(0);
    return;
  }
  WorkerPool::instance().run(threads, body);
}

}  // namespace catbench::kernels
