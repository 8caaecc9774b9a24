#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hts {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work is claimed
// dynamically but every task writes to its own slot, so results never
// depend on scheduling. The first exception (lowest index) is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn &&fn) {
    if (n == 0) {
        return;
    }
    jobs = std::clamp<std::size_t>(jobs, 1, n);
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(jobs - 1);
        for (std::size_t j = 1; j < jobs; ++j) {
            pool.emplace_back(worker);
        }
        worker();
    }
    for (auto &e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace hts
