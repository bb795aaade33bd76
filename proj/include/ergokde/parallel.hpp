#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ergokde {

// Worker cap: hardware concurrency, optionally limited by ERGOKDE_THREADS.
inline unsigned thread_cap() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ERGOKDE_THREADS")) {
        const long requested = std::strtol(env, nullptr, 10);
        if (requested >= 1) n = std::min<long>(n, requested);
    }
    return n;
}

// Runs body(i) for i in [0, n). Work is claimed index-by-index; callers must
// write results into per-index slots so output is independent of scheduling.
template <typename Body>
void parallel_for_index(std::size_t n, const Body& body, unsigned workers = thread_cap()) {
    workers = std::min<std::size_t>(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto run = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ergokde
