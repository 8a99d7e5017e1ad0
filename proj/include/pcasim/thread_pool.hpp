/*
 * Copyright 2026 The pcasim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace pcasim {

/// Worker cap from MANOJAVAM_SIM_THREADS (default 1, i.e. fully sequential).
inline std::size_t configured_threads()
{
    const char* env = std::getenv("MANOJAVAM_SIM_THREADS");
    if (!env || !*env) return 1;
    try {
        const long v = std::stol(env);
        return v >= 1 ? static_cast<std::size_t>(v) : 1;
    } catch (...) {
        return 1;
    }
}

/// Fixed-size pool running index-parallel loops. With one thread the loop
/// body runs inline on the caller.
class ThreadPool {
public:
    explicit ThreadPool(std::size_t threads = 1) : n_threads_(threads == 0 ? 1 : threads)
    {
        for (std::size_t i = 1; i < n_threads_; ++i) workers_.emplace_back([this] { worker_loop(); });
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    ~ThreadPool()
    {
        {
            std::lock_guard lk(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    std::size_t size() const { return n_threads_; }

    /// Runs fn(i) for i in [0, n); returns once all calls have finished.
    void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn)
    {
        if (n_threads_ == 1 || n <= 1) {
            for (std::size_t i = 0; i < n; ++i) fn(i);
            return;
        }
        {
            std::lock_guard lk(mu_);
            job_ = &fn;
            job_size_ = n;
            next_ = 0;
            pending_ = n;
            error_ = nullptr;
            ++generation_;
        }
        cv_.notify_all();
        run_items();
        std::unique_lock lk(mu_);
        done_cv_.wait(lk, [this] { return pending_ == 0; });
        job_ = nullptr;
        if (error_) std::rethrow_exception(error_);
    }

private:
    void run_items()
    {
        for (;;) {
            std::size_t i;
            const std::function<void(std::size_t)>* job;
            {
                std::lock_guard lk(mu_);
                if (!job_ || next_ >= job_size_) return;
                i = next_++;
                job = job_;
            }
            try {
                (*job)(i);
            } catch (...) {
                std::lock_guard lk(mu_);
                if (!error_) error_ = std::current_exception();
            }
            std::lock_guard lk(mu_);
            if (--pending_ == 0) done_cv_.notify_all();
        }
    }

    void worker_loop()
    {
        std::size_t seen = 0;
        for (;;) {
            {
                std::unique_lock lk(mu_);
                cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
            }
            run_items();
        }
    }

    std::size_t n_threads_;
    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    const std::function<void(std::size_t)>* job_ = nullptr;
    std::size_t job_size_ = 0;
    std::size_t next_ = 0;
    std::size_t pending_ = 0;
    std::size_t generation_ = 0;
    std::exception_ptr error_;
    bool stop_ = false;
};

} // namespace pcasim
