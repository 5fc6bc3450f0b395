#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace cocycle {

// Runs fn(i) for i in [0, count) and collects results in index order, so the
// output is identical for any thread count.  Each index must be independent
// (per-index seeds derived from a base seed, never a shared stream).  The
// lowest-index exception wins and is rethrown after all threads join.
template <typename Result, typename Fn>
std::vector<Result> ordered_parallel_map(std::size_t count,
                                         unsigned threads, Fn&& fn) {
    std::vector<Result> results(count);
    if (count == 0) return results;
    if (threads <= 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) results[i] = fn(i);
        return results;
    }
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(threads, count));
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (std::size_t i = w; i < count; i += workers) {
                try {
                    results[i] = fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& err : errors) {
        if (err) std::rethrow_exception(err);
    }
    return results;
}

// Thread-count resolution: explicit value, else the COCYCLE_LAB_THREADS
// environment variable, else hardware concurrency ("0 = auto" in both).
unsigned resolve_thread_count(int requested);

}  // namespace cocycle
