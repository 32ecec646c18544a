// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fovseg {

// Static block partition of [0, n) over `threads` workers. Worker w handles a
// contiguous index range, so per-index outputs are deterministic regardless
// of thread count; callers reduce in index order.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr error;
    std::mutex error_mu;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            const std::size_t lo = n * w / workers;
            const std::size_t hi = n * (w + 1) / workers;
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// Default worker count: FOVSEG_THREADS env var, else 1 (determinism first).
inline int default_thread_count() {
    if (const char* env = std::getenv("FOVSEG_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

}  // namespace fovseg
