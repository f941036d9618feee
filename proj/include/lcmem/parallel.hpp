#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace lcmem {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(begin, end, chunk_index) over [0, n) split into fixed-size chunks.
// The chunk grid depends only on chunk_size, never on the thread count, so
// callers that write per-chunk outputs and reduce them in chunk order get
// bit-identical results for any number of workers.
inline void parallel_chunks(size_t n, size_t chunk_size, int threads,
                            const std::function<void(size_t, size_t, size_t)>& fn) {
    if (n == 0) return;
    if (chunk_size == 0) chunk_size = 1;
    const size_t n_chunks = (n + chunk_size - 1) / chunk_size;
    threads = resolve_threads(threads);
    if (threads <= 1 || n_chunks == 1) {
        for (size_t c = 0; c < n_chunks; ++c) {
            size_t b = c * chunk_size;
            fn(b, std::min(b + chunk_size, n), c);
        }
        return;
    }
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            size_t c = next.fetch_add(1);
            if (c >= n_chunks) break;
            size_t b = c * chunk_size;
            fn(b, std::min(b + chunk_size, n), c);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads) - 1);
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

} // namespace lcmem
