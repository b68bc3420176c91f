// radtwin - geometry-conditioned radio propagation prediction for dynamic indoor scenes
// Copyright (C) 2026 radtwin contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "radtwin/nn/threadpool.hpp"

#include <algorithm>
#include <cstdlib>

namespace radtwin::nn {

int default_thread_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1)
        n = 1;
    if (const char *env = std::getenv("RADTWIN_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1)
            n = std::min(n, cap);
    }
    return n;
}

ThreadPool &ThreadPool::instance() {
    static ThreadPool pool(default_thread_count());
    return pool;
}

ThreadPool::ThreadPool(int threads) : n_threads_(std::max(1, threads)) {
    for (int i = 1; i < n_threads_; ++i)
        workers_.emplace_back([this, i] { worker_loop(i); });
}

ThreadPool::~ThreadPool() {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        stop_ = true;
    }
    cv_start_.notify_all();
    for (std::thread &t : workers_)
        t.join();
}

void ThreadPool::parallel_for(std::int64_t n,
                              const std::function<void(int, std::int64_t, std::int64_t)> &fn) {
    if (n <= 0)
        return;
    const int chunks = static_cast<int>(std::min<std::int64_t>(n_threads_, n));
    if (chunks == 1) {
        fn(0, 0, n);
        return;
    }

    {
        std::lock_guard<std::mutex> lock(mutex_);
        job_n_ = n;
        job_chunks_ = chunks;
        job_fn_ = &fn;
        pending_ = n_threads_ - 1; // every worker checks in, idle ones skip work
        ++generation_;
    }
    cv_start_.notify_all();

    // Chunk 0 runs on the calling thread.
    const std::int64_t per = (n + chunks - 1) / chunks;
    fn(0, 0, std::min<std::int64_t>(per, n));

    std::unique_lock<std::mutex> lock(mutex_);
    cv_done_.wait(lock, [this] { return pending_ == 0; });
    job_fn_ = nullptr;
}

void ThreadPool::worker_loop(int worker_id) {
    std::uint64_t seen = 0;
    for (;;) {
        const std::function<void(int, std::int64_t, std::int64_t)> *fn = nullptr;
        std::int64_t n = 0;
        int chunks = 0;
        {
            std::unique_lock<std::mutex> lock(mutex_);
            cv_start_.wait(lock, [&] { return stop_ || generation_ != seen; });
            if (stop_)
                return;
            seen = generation_;
            fn = job_fn_;
            n = job_n_;
            chunks = job_chunks_;
        }
        if (fn != nullptr && worker_id < chunks) {
            const std::int64_t per = (n + chunks - 1) / chunks;
            const std::int64_t lo = per * worker_id;
            const std::int64_t hi = std::min<std::int64_t>(lo + per, n);
            if (lo < hi)
                (*fn)(worker_id, lo, hi);
        }
        {
            std::lock_guard<std::mutex> lock(mutex_);
            if (--pending_ == 0)
                cv_done_.notify_all();
        }
    }
}

} // namespace radtwin::nn
