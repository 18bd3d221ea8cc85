#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace stackstab {

/// Worker cap for the library's parallel loops. Results never depend on it.
struct Parallelism {
    std::size_t threads = 1;
};

namespace detail {
inline thread_local bool inside_parallel_region = false;
}

/// Calls fn(i) for every i in [0, n). With more than one thread, indices are
/// handed out dynamically; callers write into slot i and reduce afterwards in
/// index order. Nested calls run serially on the calling worker. If any call
/// throws, the exception from the lowest failing index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Parallelism parallelism, Fn&& fn) {
    const std::size_t workers = std::min(parallelism.threads, n);
    if (workers <= 1 || detail::inside_parallel_region) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::size_t error_index = n;
    std::exception_ptr error;

    auto work = [&] {
        detail::inside_parallel_region = true;
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
            }
        }
        detail::inside_parallel_region = false;
    };

    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace stackstab
