#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace zempc {

// SplitMix64 finalizer (Steele, Lea & Flood). Used as a keyed counter hash so
// every random draw is addressable as (seed, counter, lane): reproducible
// across platforms and safe to evaluate out of order.
inline std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based uniform generator. draw(counter, lane) is a pure function of
// (seed, counter, lane); uniforms are built from the top 53 bits so results
// are identical on any IEEE-754 platform.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    [[nodiscard]] std::uint64_t bits(std::uint64_t counter, std::uint64_t lane = 0) const noexcept {
        return splitmix64(splitmix64(seed_ ^ 0x5bf03655c0e3ab1fULL) + splitmix64(counter) + lane * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform in [0, 1) with 53-bit mantissa resolution.
    [[nodiscard]] double uniform01(std::uint64_t counter, std::uint64_t lane = 0) const noexcept {
        return static_cast<double>(bits(counter, lane) >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    [[nodiscard]] double uniform(double lo, double hi, std::uint64_t counter, std::uint64_t lane = 0) const noexcept {
        return lo + (hi - lo) * uniform01(counter, lane);
    }

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

  private:
    std::uint64_t seed_;
};

/// Worker-thread cap: ZEMPC_THREADS if set, else hardware concurrency.
inline unsigned worker_threads() {
    if (const char* env = std::getenv("ZEMPC_THREADS")) {
        long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<unsigned>(n);
    }
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

// Static-partition parallel map over [0, n). Each index is processed exactly
// once and workers write only to their own indices, so results do not depend
// on the thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    unsigned threads = worker_threads();
    if (threads <= 1 || n < 2 * threads) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        std::size_t begin = t * chunk;
        std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&body, begin, end] {
            for (std::size_t i = begin; i < end; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

/// Format a double with 17 significant digits (round-trip exact).
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

}  // namespace zempc
