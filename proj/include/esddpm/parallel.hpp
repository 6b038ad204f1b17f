// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace esddpm {

/// Counts per-sample denoiser evaluations. A batch of B columns counts B.
struct EvalCounter {
    std::atomic<std::uint64_t> evaluations{0};

    void add(std::uint64_t n) { evaluations.fetch_add(n, std::memory_order_relaxed); }
    std::uint64_t value() const { return evaluations.load(std::memory_order_relaxed); }
    void reset() { evaluations.store(0, std::memory_order_relaxed); }
};

/// Splits [0, n) into fixed chunks of `chunk` items and runs fn(begin, end)
/// on each, spread over `workers` threads. Chunk boundaries do not depend on
/// the worker count, so per-chunk results are identical for any `workers`.
template <typename Fn>
void for_each_chunk(std::int64_t n, std::int64_t chunk, int workers, Fn&& fn) {
    if (n <= 0) {
        return;
    }
    chunk = std::max<std::int64_t>(chunk, 1);
    const std::int64_t n_chunks = (n + chunk - 1) / chunk;
    workers = static_cast<int>(std::clamp<std::int64_t>(workers, 1, n_chunks));
    if (workers == 1) {
        for (std::int64_t c = 0; c < n_chunks; ++c) {
            fn(c * chunk, std::min(n, (c + 1) * chunk));
        }
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (;;) {
                const std::int64_t c = next.fetch_add(1);
                if (c >= n_chunks) {
                    return;
                }
                try {
                    fn(c * chunk, std::min(n, (c + 1) * chunk));
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                    next.store(n_chunks);
                }
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

}  // namespace esddpm
