// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include "vidbossa/parallel.hpp"

#include <cstdlib>
#include <mutex>
#include <string>

namespace vidbossa {

uint32_t resolve_threads(uint32_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("VIDBOSSA_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<uint32_t>(v);
    }
    return 1;
}

void parallel_for(size_t n, uint32_t threads, const std::function<void(size_t)>& fn) {
    threads = resolve_threads(threads);
    if (threads <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const uint32_t spawn = static_cast<uint32_t>(std::min<size_t>(threads, n));
    pool.reserve(spawn);
    for (uint32_t t = 0; t < spawn; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace vidbossa
