#pragma once

#include <cstdint>
#include <functional>

namespace prunekit {

// Latency summary of repeated kernel invocations on one pinned thread.
// Median and MAD (median absolute deviation) are robust against scheduler
// noise; mean/stddev are not reported on purpose.
struct LatencyStats {
    int warmup_iters = 0;
    int measure_iters = 0;
    std::uint64_t median_ns = 0;
    std::uint64_t mad_ns = 0;
    std::uint64_t mac_count = 0;  // multiplies executed per invocation

    // Throughput implied by the median latency, in giga-MACs per second.
    double gmacs_per_sec() const;
};

// Runs `fn` warmup_iters times unmeasured, then measure_iters times under a
// monotonic clock, pinning the calling thread to its current CPU for the
// duration. Throws ValidationError on non-positive measure_iters.
LatencyStats benchmark_kernel(const std::function<void()>& fn, std::uint64_t mac_count,
                              int warmup_iters, int measure_iters);

}  // namespace prunekit
