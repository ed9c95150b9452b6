#include "catbench/parallel.hpp"

namespace catbench::kernels {

WorkerPool &WorkerPool::instance() {
  static WorkerPool pool;
  return pool;
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto &t : workers_) t.join();
}

void WorkerPool::ensure(int workers) {
  while (static_cast<int>(workers_.size()) < workers) {
    const int id = static_cast<int>(workers_.size()) + 1;
    workers_.emplace_back([this, id] { loop(id); });
  }
}

void WorkerPool::loop(int id) {
  std::uint64_t seen = 0;
  std::unique_lock lock(mutex_);
  for (;;) {
    wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
    if (stop_) return;
    seen = generation_;
    if (id >= active_) continue;
    const auto *task = task_;
    lock.unlock();
    (*task)(id);
    lock.lock();
    if (--pending_ == 0) done_.notify_one();
  }
}

void WorkerPool::run(int threads, const std::function<void(int)> &task) {
  {
    std::lock_guard lock(mutex_);
    ensure(threads - 1);
    task_ = &task;
    active_ = threads;
    pending_ = threads - 1;
    ++generation_;
  }
  wake_.notify_all();
  task(0);
  std::unique_lock lock(mutex_);
  done_.wait(lock, [&] { return pending_ == 0; });
  task_ = nullptr;
}

}  // namespace catbench::kernels
