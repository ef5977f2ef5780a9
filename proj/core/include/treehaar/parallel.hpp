#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace treehaar {

// Scan parallelism. Work is split into a fixed chunk grid and partial
// results are combined in chunk order, so every result is bit-identical for
// any worker count (including 1).

namespace detail {

inline int g_max_threads = 1;
inline constexpr std::size_t kChunkGrid = 64;
inline constexpr std::size_t kSerialCutoff = 256;

} // namespace detail

inline void set_max_threads(int n) { detail::g_max_threads = n < 1 ? 1 : n; }
inline int max_threads() { return detail::g_max_threads; }

namespace detail {

// body(begin, end, chunk_index); chunk boundaries depend only on n
template <typename Body>
void run_chunked(std::size_t n, const Body& body) {
    if (n == 0) return;
    const int workers = std::min<int>(max_threads(),
                                      static_cast<int>((n + kSerialCutoff - 1) / kSerialCutoff));
    const std::size_t chunks = std::min(kChunkGrid, n);
    const std::size_t per = (n + chunks - 1) / chunks;
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) {
            const std::size_t b = c * per;
            const std::size_t e = std::min(n, b + per);
            if (b < e) body(b, e, c);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            const std::size_t b = c * per;
            const std::size_t e = std::min(n, b + per);
            if (b < e) body(b, e, c);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers) - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

} // namespace detail

/// fn(begin, end) over a fixed partition of [0, n).
template <typename Fn>
void parallel_for(std::size_t n, const Fn& fn) {
    detail::run_chunked(n, [&fn](std::size_t b, std::size_t e, std::size_t) { fn(b, e); });
}

/// Reduction with per-chunk partials combined in chunk order; the grouping
/// is fixed by n alone, so sums are reproducible across thread counts.
template <typename T, typename Chunk, typename Combine>
T parallel_reduce(std::size_t n, T init, const Chunk& chunk, const Combine& combine) {
    if (n == 0) return init;
    const std::size_t chunks = std::min(detail::kChunkGrid, n);
    std::vector<T> partials(chunks, init);
    detail::run_chunked(n, [&](std::size_t b, std::size_t e, std::size_t c) {
        partials[c] = chunk(b, e);
    });
    T acc = init;
    for (const T& p : partials) acc = combine(acc, p);
    return acc;
}

} // namespace treehaar
