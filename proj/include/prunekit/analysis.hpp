#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "prunekit/dataset.hpp"
#include "prunekit/mask.hpp"
#include "prunekit/model.hpp"

namespace prunekit {

struct RoleQuantiles {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct SensitivityEntry {
    std::string layer;
    Role role = Role::other;
    double top1 = 0.0;  // after pruning this layer alone, no fine-tuning
};

struct SensitivityReport {
    double baseline_top1 = 0.0;
    double sparsity_used = 0.95;
    std::vector<SensitivityEntry> per_layer;  // exactly the prunable layers, depth order
    std::map<std::string, RoleQuantiles> by_role;  // keyed by role name
};

struct SparsityPatternEntry {
    std::string layer;
    int depth_index = 0;  // position in the manifest
    Role role = Role::other;
    double sparsity = 0.0;
};

struct SparsityPattern {
    std::vector<SparsityPatternEntry> entries;  // prunable layers, depth order
};

// Linear interpolation between closest ranks: position q*(m-1) in the sorted
// sample. q must lie in [0,1]; the sample must be nonempty.
double quantile(std::span<const double> values, double q);

// For every prunable layer independently: magnitude-prune that layer alone at
// sparsity s, evaluate top-1 (no fine-tuning), restore. The input model is
// left untouched; probes run in parallel up to the thread budget.
SensitivityReport layer_sensitivity(const ModelGraph& model, const Dataset& eval_set,
                                    double s = 0.95);

// Per-layer achieved sparsity of a masked model, in manifest depth order.
SparsityPattern sparsity_pattern(const SparsityMask& mask, const ModelGraph& model);

// nodes * gpus_per_node * hours_to_convergence; all inputs must be positive.
double gpu_hours(int nodes, int gpus_per_node, double hours_to_convergence);

// How many times cheaper `ours` is than `baseline`.
double speedup(double baseline_gpu_hours, double ours_gpu_hours);

}  // namespace prunekit
