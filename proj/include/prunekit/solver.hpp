#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "prunekit/mask.hpp"
#include "prunekit/model.hpp"

namespace prunekit {

// Seed/target/prunable totals in MFLOPs (MAC convention).
struct FlopsTarget {
    double seed_total_mflops = 0.0;
    double target_total_mflops = 0.0;
    double prunable_mflops = 0.0;
};

void validate_flops_target(const FlopsTarget& t);

struct SolveResult {
    double sparsity = 0.0;
    double threshold = 0.0;  // global mode only
    double achieved_mflops = 0.0;
    std::uint64_t achieved_macs = 0;
    std::uint64_t pruned_weights = 0;
    std::map<std::string, double> per_layer_sparsity;  // global mode only
};

// Closed-form uniform sparsity: (seed - target) / prunable. Throws
// InfeasibleError when the result leaves [0, 1].
double solve_uniform(const FlopsTarget& target);

// Prunable MFLOPs recovered from one (seed, target, sparsity) observation by
// inverting the uniform formula.
double invert_prunable_mflops(double seed_total_mflops, double target_total_mflops,
                              double sparsity);

// Walks the global magnitude order, retiring one weight at a time (each saves
// layer_weight_multiplier MACs), and stops as soon as the running effective
// total first drops to <= target. Overshoot below target is bounded by one
// weight's multiplier. Throws InfeasibleError when pruning every prunable
// weight still exceeds the target.
std::pair<SolveResult, SparsityMask> solve_global(const ModelGraph& model,
                                                  double target_total_mflops);
std::pair<SolveResult, SparsityMask> solve_global_macs(const ModelGraph& model,
                                                       std::uint64_t target_macs);

// Recomputes effective FLOPs under the mask; success means achieved <= target.
struct VerifyResult {
    bool ok = false;
    double achieved_mflops = 0.0;
    std::uint64_t achieved_macs = 0;
};
VerifyResult verify_mask_flops(const ModelGraph& model, const SparsityMask& mask,
                               double target_total_mflops);

inline std::uint64_t mflops_to_macs(double mflops) {
    return static_cast<std::uint64_t>(std::llround(mflops * 1e6));
}
inline double macs_to_mflops(std::uint64_t macs) { return static_cast<double>(macs) / 1e6; }

}  // namespace prunekit
