#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace abstain {

/// Worker-thread budget: ABSTAIN_METROLOGY_THREADS if set (minimum 1),
/// otherwise the hardware concurrency.
inline int thread_budget() {
    if (const char* env = std::getenv("ABSTAIN_METROLOGY_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, count). Each index must write only to its own
/// output slot, so results are identical to the serial loop regardless of
/// scheduling. The first exception thrown by any index is rethrown here.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
    const int threads = thread_budget();
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < count && !failed.load(); i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t spawn = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    pool.reserve(spawn);
    for (std::size_t t = 0; t < spawn; ++t) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace abstain
