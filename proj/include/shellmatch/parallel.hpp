#ifndef SHELLMATCH_PARALLEL_HPP
#define SHELLMATCH_PARALLEL_HPP

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace shellmatch {

// Worker cap: SHELLMATCH_THREADS env var, else hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("SHELLMATCH_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : int(hc);
}

// Runs f(begin, end, chunk_index) over fixed-size chunks of [0, n).
// Chunking is independent of the worker count, so per-chunk results combined
// in chunk order are bitwise reproducible across thread counts.
template <typename F>
void parallel_chunks(std::size_t n, std::size_t chunk_size, F&& f) {
    if (n == 0) return;
    const std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
    const int workers = std::min<std::size_t>(worker_count(), n_chunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c)
            f(c * chunk_size, std::min(n, (c + 1) * chunk_size), c);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            f(c * chunk_size, std::min(n, (c + 1) * chunk_size), c);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

} // namespace shellmatch

#endif
