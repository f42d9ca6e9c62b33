#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace gdsr {

// Number of worker threads. Fixed at first call; override with GDSR_THREADS.
inline int thread_count() {
    static const int n = [] {
        if (const char* env = std::getenv("GDSR_THREADS")) {
            int v = std::atoi(env);
            if (v > 0) return v;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }();
    return n;
}

// Static-partition parallel map over [0, n). Each index is processed by
// exactly one thread, so writes to disjoint slots are deterministic.
// Reductions must be done per-chunk and merged in chunk order by the caller.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& chunk_fn) {
    const int nt = thread_count();
    if (nt <= 1 || n < 256) {
        chunk_fn(0, n);
        return;
    }
    const std::size_t per = (n + nt - 1) / nt;
    std::vector<std::thread> workers;
    workers.reserve(nt);
    for (int t = 0; t < nt; ++t) {
        const std::size_t lo = std::min(n, t * per);
        const std::size_t hi = std::min(n, lo + per);
        if (lo >= hi) break;
        workers.emplace_back(chunk_fn, lo, hi);
    }
    for (auto& w : workers) w.join();
}

}  // namespace gdsr
