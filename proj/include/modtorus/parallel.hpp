#pragma once

/**
 * @file parallel.hpp
 * @brief Compensated summation and a deterministic chunked thread pool.
 *
 * Work is split into chunks whose boundaries depend only on the problem
 * size, never on the thread count. Partial results are merged in chunk
 * order, so every reduction is bit-identical for any number of workers.
 */

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace modtorus {

/// Neumaier's variant of Kahan summation.
struct compensated_sum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) noexcept {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }

    void merge(const compensated_sum& other) noexcept {
        add(other.sum);
        add(other.carry);
    }

    double value() const noexcept { return sum + carry; }
};

struct compensated_complex_sum {
    compensated_sum re, im;

    void add(std::complex<double> z) noexcept {
        re.add(z.real());
        im.add(z.imag());
    }
    void merge(const compensated_complex_sum& other) noexcept {
        re.merge(other.re);
        im.merge(other.im);
    }
    std::complex<double> value() const noexcept { return {re.value(), im.value()}; }
};

namespace detail {

inline std::atomic<unsigned>& thread_override() {
    static std::atomic<unsigned> value{0};
    return value;
}

} // namespace detail

/// Sets the worker count used by parallel loops; 0 restores the default.
inline void set_thread_count(unsigned n) { detail::thread_override().store(n); }

/// Worker count: MODTORUS_THREADS if set, else the value passed to
/// set_thread_count, else the hardware concurrency.
inline unsigned thread_count() {
    if (const char* env = std::getenv("MODTORUS_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    if (unsigned n = detail::thread_override().load(); n > 0) return n;
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(begin, end, chunk) over [0, n) split into chunks of `grain`
/// items. Exceptions thrown by a chunk are rethrown on the calling thread.
template <class Body>
void parallel_chunks(std::size_t n, std::size_t grain, Body&& body) {
    if (n == 0) return;
    grain = std::max<std::size_t>(grain, 1);
    const std::size_t chunks = (n + grain - 1) / grain;
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), chunks));
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) body(c * grain, std::min(n, (c + 1) * grain), c);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            try {
                body(c * grain, std::min(n, (c + 1) * grain), c);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(chunks);
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

/// Chunked map-reduce: chunk_fn(begin, end) yields a partial, partials are
/// merged left to right with merge(acc, partial).
template <class T, class ChunkFn, class Merge>
T parallel_reduce(std::size_t n, std::size_t grain, T init, ChunkFn&& chunk_fn, Merge&& merge) {
    grain = std::max<std::size_t>(grain, 1);
    const std::size_t chunks = n == 0 ? 0 : (n + grain - 1) / grain;
    std::vector<T> partial(chunks, init);
    parallel_chunks(n, grain, [&](std::size_t b, std::size_t e, std::size_t c) { partial[c] = chunk_fn(b, e); });
    T acc = init;
    for (auto& p : partial) merge(acc, p);
    return acc;
}

} // namespace modtorus
