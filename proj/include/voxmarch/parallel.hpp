#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace voxmarch {

inline int resolve_threads(int n_threads) {
    if (n_threads > 0) return n_threads;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(hw);
}

// Static range split across n_threads. Each worker gets one contiguous
// [begin, end) chunk, so results written to per-index slots are independent
// of the thread count. Exceptions from workers are rethrown on the caller.
inline void parallel_for(size_t n, int n_threads,
                         const std::function<void(size_t, size_t)>& body) {
    n_threads = resolve_threads(n_threads);
    if (n == 0) return;
    if (n_threads <= 1 || n < 2) {
        body(0, n);
        return;
    }
    size_t chunks = std::min<size_t>(size_t(n_threads), n);
    size_t per = (n + chunks - 1) / chunks;
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(chunks);
    for (size_t c = 0; c < chunks; ++c) {
        size_t begin = c * per;
        size_t end = std::min(n, begin + per);
        if (begin >= end) break;
        workers.emplace_back([&, c, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace voxmarch
