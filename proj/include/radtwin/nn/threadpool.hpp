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

#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace radtwin::nn {

/// Persistent worker pool for data-parallel kernels. Work is split into
/// contiguous chunks, one per worker, so every output element is produced by
/// exactly one thread in a fixed order: results are bit-identical for a
/// given thread count. RADTWIN_THREADS caps the worker count.
class ThreadPool {
public:
    static ThreadPool &instance();

    explicit ThreadPool(int threads);
    ~ThreadPool();

    ThreadPool(const ThreadPool &) = delete;
    ThreadPool &operator=(const ThreadPool &) = delete;

    int size() const { return n_threads_; }

    /// Runs fn(chunk_id, lo, hi) over a fixed partition of [0, n). The
    /// calling thread participates. fn must only write state owned by its
    /// chunk (or indexed by chunk_id).
    void parallel_for(std::int64_t n,
                      const std::function<void(int, std::int64_t, std::int64_t)> &fn);

private:
    void worker_loop(int worker_id);

    int n_threads_;
    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable cv_start_;
    std::condition_variable cv_done_;
    std::uint64_t generation_ = 0;
    int pending_ = 0;
    bool stop_ = false;
    std::int64_t job_n_ = 0;
    int job_chunks_ = 0;
    const std::function<void(int, std::int64_t, std::int64_t)> *job_fn_ = nullptr;
};

/// Worker count from RADTWIN_THREADS, else hardware concurrency.
int default_thread_count();

} // namespace radtwin::nn
