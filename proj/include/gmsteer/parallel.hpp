/**
 * @file parallel.hpp
 * @brief Minimal deterministic parallel loop over an index range.
 */

#ifndef GMSTEER_PARALLEL_HPP
#define GMSTEER_PARALLEL_HPP

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gmsteer {

/// Runs fn(i) for i in [0, n). Work items are claimed from a shared counter,
/// so outputs must be written to per-index slots; aggregation order is then
/// independent of scheduling. threads <= 1 runs inline.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    if (n <= 0) return;
    if (threads <= 1 || n == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    threads = std::min(threads, n);
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

/// Default worker count used by modules that parallelize internally.
inline int default_thread_count() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace gmsteer

#endif
