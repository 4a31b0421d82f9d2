// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace nm {

inline int hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : int(n);
}

// Runs fn(chunk) for chunk in [0, n_chunks). Chunk boundaries are fixed by the
// caller, never by the worker count, so any state written per-chunk (and any
// reduction done afterwards in chunk order) is identical for every value of
// `threads`. Exceptions from workers are rethrown on the calling thread.
inline void parallel_chunks(int n_chunks, int threads, const std::function<void(int)>& fn) {
    if (n_chunks <= 0) return;
    if (threads <= 1 || n_chunks == 1) {
        for (int c = 0; c < n_chunks; ++c) fn(c);
        return;
    }
    threads = std::min(threads, n_chunks);
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    auto worker = [&] {
        for (;;) {
            int c = next.fetch_add(1);
            if (c >= n_chunks || failed.load()) return;
            try {
                fn(c);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace nm
