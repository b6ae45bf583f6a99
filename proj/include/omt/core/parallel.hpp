#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace omt {

/// Process-wide worker count honored by all parallel stages. Results never
/// depend on it; only wall time does.
inline int& worker_count() {
    static int n = 1;
    return n;
}

inline void set_worker_count(int n) { worker_count() = n < 1 ? 1 : n; }

/// Static block partition of [0, count) over the configured workers.
/// fn(begin, end) runs once per block; blocks are disjoint, so any writes
/// indexed by the loop variable are race-free and deterministic.
template <typename Fn>
void parallel_blocks(std::size_t count, Fn&& fn) {
    int w = worker_count();
    if (w <= 1 || count < 2) {
        if (count > 0) fn(std::size_t{0}, count);
        return;
    }
    std::size_t nb = static_cast<std::size_t>(w);
    if (nb > count) nb = count;
    std::vector<std::thread> threads;
    threads.reserve(nb);
    std::size_t chunk = (count + nb - 1) / nb;
    for (std::size_t b = 0; b < nb; ++b) {
        std::size_t lo = b * chunk;
        std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : threads) t.join();
}

/// Element-wise parallel loop: fn(i) for i in [0, count).
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    parallel_blocks(count, [&fn](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
}

} // namespace omt
