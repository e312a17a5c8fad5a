#include "freeflow/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace freeflow {

std::size_t worker_count() {
    std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("FREEFLOW_THREADS")) {
        try {
            const long cap = std::stol(env);
            if (cap > 0) hw = std::min(hw, static_cast<std::size_t>(cap));
        } catch (const std::exception&) {
            // ignore malformed values
        }
    }
    return hw;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    threads.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace freeflow
