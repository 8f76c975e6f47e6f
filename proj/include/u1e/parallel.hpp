#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace u1e {

// Row-sliced worker pool. Every parallel construct in the library is either a
// pure map over disjoint rows or a reduction combining per-row partials in
// fixed row order, so results are bitwise identical for any thread count.
// U1EVOLVE_THREADS caps the pool size.
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    int size() const { return static_cast<int>(workers_.size()) + 1; }

    // Calls fn(begin, end) on contiguous sub-ranges of [0, count) covering it
    // exactly once. Runs inline when the pool is empty or the range is small.
    void run_ranges(int count, const std::function<void(int, int)>& fn) {
        if (count <= 0) return;
        if (workers_.empty() || count < 2 * size()) {
            fn(0, count);
            return;
        }
        {
            std::lock_guard<std::mutex> lock(mutex_);
            task_ = &fn;
            task_count_ = count;
            next_chunk_.store(0, std::memory_order_relaxed);
            pending_ = static_cast<int>(workers_.size());
            ++generation_;
        }
        cv_start_.notify_all();
        work(fn, count);
        std::unique_lock<std::mutex> lock(mutex_);
        cv_done_.wait(lock, [&] { return pending_ == 0; });
        task_ = nullptr;
    }

private:
    ThreadPool() {
        int n = static_cast<int>(std::thread::hardware_concurrency());
        if (n <= 0) n = 1;
        if (const char* env = std::getenv("U1EVOLVE_THREADS")) {
            int cap = std::atoi(env);
            if (cap >= 1) n = std::min(n, cap);
        }
        for (int i = 0; i + 1 < n; ++i)
            workers_.emplace_back([this] { worker_loop(); });
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stop_ = true;
        }
        cv_start_.notify_all();
        for (auto& w : workers_) w.join();
    }

    void worker_loop() {
        long seen = 0;
        for (;;) {
            const std::function<void(int, int)>* task = nullptr;
            int count = 0;
            {
                std::unique_lock<std::mutex> lock(mutex_);
                cv_start_.wait(lock, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
                task = task_;
                count = task_count_;
            }
            if (task) work(*task, count);
            {
                std::lock_guard<std::mutex> lock(mutex_);
                if (--pending_ == 0) cv_done_.notify_all();
            }
        }
    }

    void work(const std::function<void(int, int)>& fn, int count) {
        const int chunk = std::max(1, count / (4 * size()));
        for (;;) {
            int begin = next_chunk_.fetch_add(chunk, std::memory_order_relaxed);
            if (begin >= count) break;
            fn(begin, std::min(begin + chunk, count));
        }
    }

    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable cv_start_, cv_done_;
    const std::function<void(int, int)>* task_ = nullptr;
    int task_count_ = 0;
    std::atomic<int> next_chunk_{0};
    int pending_ = 0;
    long generation_ = 0;
    bool stop_ = false;
};

// Parallel map over rows [0, rows). fn(iy) must touch only row iy of outputs.
template <class Fn>
inline void parallel_rows(int rows, Fn&& fn) {
    std::function<void(int, int)> wrapped = [&](int b, int e) {
        for (int iy = b; iy < e; ++iy) fn(iy);
    };
    ThreadPool::instance().run_ranges(rows, wrapped);
}

// Deterministic reduction: per-row partials are computed left-to-right in
// parallel, then combined serially in row order.
template <class RowFn>
inline double parallel_row_sum(int rows, RowFn&& row_sum) {
    std::vector<double> partial(static_cast<size_t>(rows), 0.0);
    parallel_rows(rows, [&](int iy) { partial[static_cast<size_t>(iy)] = row_sum(iy); });
    double total = 0.0;
    for (int iy = 0; iy < rows; ++iy) total += partial[static_cast<size_t>(iy)];
    return total;
}

template <class RowFn>
inline double parallel_row_max(int rows, RowFn&& row_max) {
    std::vector<double> partial(static_cast<size_t>(rows), 0.0);
    parallel_rows(rows, [&](int iy) { partial[static_cast<size_t>(iy)] = row_max(iy); });
    double m = 0.0;
    for (int iy = 0; iy < rows; ++iy) m = std::max(m, partial[static_cast<size_t>(iy)]);
    return m;
}

} // namespace u1e
