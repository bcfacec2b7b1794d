#pragma once

#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace navlab {

// Persistent worker pool for data-parallel loops. parallel_for splits [0, n)
// into one contiguous chunk per worker, so every index is computed by exactly
// one thread and results are bit-identical for any worker count.
class ThreadPool {
public:
    explicit ThreadPool(int workers = 1) { resize(workers); }

    ~ThreadPool() { stop(); }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    int workers() const { return workers_; }

    void resize(int workers) {
        if (workers < 1) workers = 1;
        stop();
        workers_ = workers;
        done_count_ = 0;
        generation_ = 0;
        stopping_ = false;
        for (int i = 1; i < workers_; ++i) {
            threads_.emplace_back([this, i] { worker_loop(i); });
        }
    }

    void parallel_for(int n, const std::function<void(int)>& fn) {
        if (n <= 0) return;
        if (workers_ == 1 || n == 1) {
            for (int i = 0; i < n; ++i) fn(i);
            return;
        }
        {
            std::unique_lock<std::mutex> lock(mutex_);
            job_ = &fn;
            job_n_ = n;
            done_count_ = 0;
            ++generation_;
        }
        cv_start_.notify_all();
        run_chunk(0);
        {
            std::unique_lock<std::mutex> lock(mutex_);
            cv_done_.wait(lock, [this] { return done_count_ == workers_ - 1; });
            job_ = nullptr;
        }
    }

    // Process-wide pool; size set once at startup (CLI --workers).
    static ThreadPool& global() {
        static ThreadPool pool(1);
        return pool;
    }

private:
    void run_chunk(int worker_idx) {
        const int n = job_n_;
        const int chunk = (n + workers_ - 1) / workers_;
        const int lo = worker_idx * chunk;
        const int hi = std::min(n, lo + chunk);
        const auto& fn = *job_;
        for (int i = lo; i < hi; ++i) fn(i);
    }

    void worker_loop(int worker_idx) {
        uint64_t seen = 0;
        for (;;) {
            {
                std::unique_lock<std::mutex> lock(mutex_);
                cv_start_.wait(lock, [this, &seen] { return stopping_ || generation_ != seen; });
                if (stopping_) return;
                seen = generation_;
            }
            run_chunk(worker_idx);
            {
                std::unique_lock<std::mutex> lock(mutex_);
                ++done_count_;
            }
            cv_done_.notify_one();
        }
    }

    void stop() {
        {
            std::unique_lock<std::mutex> lock(mutex_);
            stopping_ = true;
        }
        cv_start_.notify_all();
        for (auto& t : threads_) t.join();
        threads_.clear();
    }

    int workers_ = 1;
    std::vector<std::thread> threads_;
    std::mutex mutex_;
    std::condition_variable cv_start_;
    std::condition_variable cv_done_;
    const std::function<void(int)>* job_ = nullptr;
    int job_n_ = 0;
    int done_count_ = 0;
    uint64_t generation_ = 0;
    bool stopping_ = false;
};

}  // namespace navlab
