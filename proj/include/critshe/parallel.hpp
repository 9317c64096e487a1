#pragma once

#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace critshe {

inline unsigned default_threads() {
    if (const char* env = std::getenv("CRITSHE_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return unsigned(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc ? hc : 1;
}

// Runs f(i) for i in [0, n) on up to `threads` workers. Tasks are handed out
// dynamically, so callers must write results by index and reduce afterwards
// in index order; that keeps outputs independent of the worker count. The
// first exception thrown by any task is rethrown here.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    const unsigned nt = unsigned(std::min<std::size_t>(threads, n));
    std::vector<std::thread> pool;
    pool.reserve(nt - 1);
    for (unsigned k = 1; k < nt; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

} // namespace critshe
