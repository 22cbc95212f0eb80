#include "prunekit/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <vector>

#include "prunekit/common.hpp"

#if defined(__linux__)
#include <sched.h>
#endif

namespace prunekit {
namespace {

// Keep the measuring thread on one core so per-iteration timings are
// comparable; best effort, a failed pin is not an error.
void pin_to_current_cpu() {
#if defined(__linux__)
    const int cpu = sched_getcpu();
    if (cpu < 0) return;
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(cpu, &set);
    (void)sched_setaffinity(0, sizeof(set), &set);
#endif
}

std::uint64_t median_of(std::vector<std::uint64_t>& xs) {
    const std::size_t mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
    const std::uint64_t hi = xs[mid];
    if (xs.size() % 2 == 1) return hi;
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid) - 1, xs.end());
    return (xs[mid - 1] + hi) / 2;
}

}  // namespace

double LatencyStats::gmacs_per_sec() const {
    if (median_ns == 0) return 0.0;
    return static_cast<double>(mac_count) / static_cast<double>(median_ns);
}

LatencyStats benchmark_kernel(const std::function<void()>& fn, std::uint64_t mac_count,
                              int warmup_iters, int measure_iters) {
    if (measure_iters <= 0) {
        throw ValidationError("benchmark requires a positive number of measured iterations");
    }
    if (warmup_iters < 0) {
        throw ValidationError("benchmark warmup iterations must be non-negative");
    }
    pin_to_current_cpu();

    for (int i = 0; i < warmup_iters; ++i) fn();

    using clock = std::chrono::steady_clock;
    std::vector<std::uint64_t> samples(static_cast<std::size_t>(measure_iters));
    for (int i = 0; i < measure_iters; ++i) {
        const auto t0 = clock::now();
        fn();
        const auto t1 = clock::now();
        samples[static_cast<std::size_t>(i)] = static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
    }

    LatencyStats stats;
    stats.warmup_iters = warmup_iters;
    stats.measure_iters = measure_iters;
    stats.mac_count = mac_count;
    stats.median_ns = median_of(samples);
    std::vector<std::uint64_t> deviations(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        deviations[i] = samples[i] > stats.median_ns ? samples[i] - stats.median_ns
                                                     : stats.median_ns - samples[i];
    }
    stats.mad_ns = median_of(deviations);
    return stats;
}

}  // namespace prunekit
