#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace sseg {

/// Worker count cap: STREAMSEG_THREADS env var, else hardware concurrency.
inline int max_threads() {
    static int cached = [] {
        if (const char* env = std::getenv("STREAMSEG_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return v;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw ? static_cast<int>(hw) : 1;
    }();
    return cached;
}

namespace detail {

/// Persistent worker pool. A job is a chunked index space; the caller and
/// all workers drain chunks from a shared counter, so the per-call cost is
/// one notify round trip rather than a thread spawn. Jobs are serialized:
/// run() returns only after every worker has finished the epoch.
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool(max_threads() - 1);
        return pool;
    }

    using RangeFn = std::function<void(std::int64_t, std::int64_t)>;

    void run(std::int64_t n, std::int64_t chunk, const RangeFn& fn) {
        {
            std::unique_lock<std::mutex> lock(mu_);
            job_fn_ = &fn;
            job_n_ = n;
            job_chunk_ = chunk;
            next_chunk_.store(0, std::memory_order_relaxed);
            pending_ = static_cast<int>(threads_.size());
            ++epoch_;
        }
        cv_.notify_all();
        drain(fn, n, chunk);
        std::unique_lock<std::mutex> lock(mu_);
        done_cv_.wait(lock, [this] { return pending_ == 0; });
        job_fn_ = nullptr;
    }

    ~ThreadPool() {
        {
            std::unique_lock<std::mutex> lock(mu_);
            stop_ = true;
            ++epoch_;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

private:
    explicit ThreadPool(int workers) {
        for (int i = 0; i < workers; ++i) threads_.emplace_back([this] { worker_loop(); });
    }

    void drain(const RangeFn& fn, std::int64_t n, std::int64_t chunk) {
        for (;;) {
            const std::int64_t lo = next_chunk_.fetch_add(chunk, std::memory_order_relaxed);
            if (lo >= n) break;
            fn(lo, std::min(n, lo + chunk));
        }
    }

    void worker_loop() {
        std::uint64_t seen = 0;
        for (;;) {
            const RangeFn* fn = nullptr;
            std::int64_t n = 0, chunk = 0;
            {
                std::unique_lock<std::mutex> lock(mu_);
                cv_.wait(lock, [&] { return stop_ || epoch_ != seen; });
                if (stop_) return;
                seen = epoch_;
                fn = job_fn_;
                n = job_n_;
                chunk = job_chunk_;
            }
            if (fn) drain(*fn, n, chunk);
            {
                std::unique_lock<std::mutex> lock(mu_);
                if (--pending_ == 0) done_cv_.notify_one();
            }
        }
    }

    std::vector<std::thread> threads_;
    std::mutex mu_;
    std::condition_variable cv_, done_cv_;
    const RangeFn* job_fn_ = nullptr;
    std::int64_t job_n_ = 0, job_chunk_ = 1;
    std::atomic<std::int64_t> next_chunk_{0};
    int pending_ = 0;
    std::uint64_t epoch_ = 0;
    bool stop_ = false;
};

inline thread_local bool tl_inside_pool = false;

}  // namespace detail

/// Splits [0, n) into contiguous chunks of `grain` indices drained by the
/// caller plus the pool workers. Each index is processed exactly once with
/// a fixed chunk boundary, so per-index work that writes only its own
/// outputs stays deterministic regardless of the worker count or schedule.
/// Runs inline when the work is too small, only one worker is available,
/// or the caller is itself a pool worker.
inline void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn,
                         std::int64_t grain = 1024) {
    if (n <= 0) return;
    const int workers = max_threads();
    if (workers <= 1 || n < 2 * grain || detail::tl_inside_pool) {
        fn(0, n);
        return;
    }
    detail::tl_inside_pool = true;
    detail::ThreadPool::RangeFn wrapped = [&fn](std::int64_t lo, std::int64_t hi) {
        detail::tl_inside_pool = true;
        fn(lo, hi);
        detail::tl_inside_pool = false;
    };
    detail::ThreadPool::instance().run(n, grain, wrapped);
    detail::tl_inside_pool = false;
}

}  // namespace sseg
