#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace condrep {

/// Worker count: CONDREP_THREADS if set to a positive integer, otherwise the
/// hardware concurrency.
inline unsigned thread_count() {
    if (const char* env = std::getenv("CONDREP_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls body(begin, end, chunk) on contiguous chunks of [0, n). Chunk
/// boundaries depend only on n and the chunk count, never on timing.
template <class Body>
void parallel_chunks(std::size_t n, std::size_t chunks, Body&& body) {
    if (n == 0) return;
    chunks = std::max<std::size_t>(1, std::min(chunks, n));
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), chunks));
    auto range = [&](std::size_t c) {
        return std::pair<std::size_t, std::size_t>{n * c / chunks, n * (c + 1) / chunks};
    };
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) {
            auto [b, e] = range(c);
            body(b, e, c);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t c = w; c < chunks; c += workers) {
                    auto [b, e] = range(c);
                    body(b, e, c);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Element-wise parallel loop; body(i) must only touch state owned by i.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    parallel_chunks(n, std::max<std::size_t>(1, thread_count() * 4), [&](std::size_t b, std::size_t e, std::size_t) {
        for (std::size_t i = b; i < e; ++i) body(i);
    });
}

} // namespace condrep
