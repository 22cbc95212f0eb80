#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "prunekit/mask.hpp"
#include "prunekit/model.hpp"

namespace prunekit {

struct PruneReport {
    PruneMethod method = PruneMethod::uniform_magnitude;
    std::map<std::string, double> per_layer_sparsity;  // fraction removed
    double overall_prunable_sparsity = 0.0;
    // Fraction of zeros across all weight regions, prunable or not. Biases
    // excluded. Distinct from the prunable-only figure above.
    double overall_model_sparsity = 0.0;
    // Magnitude cut value; meaningful for global mode only, 0 otherwise.
    double threshold = 0.0;
};

inline constexpr int kBlockCols = 4;

// k = round(s*n) with half-up rounding. Ties between equal magnitudes break by
// ascending flat index (uniform/block: per layer; global: by layer position in
// the manifest, then flat index). Lower-ranked weights are pruned first, so the
// pruned set at s1 <= s2 is always a subset of the set at s2.
std::pair<SparsityMask, PruneReport> prune_uniform(const ModelGraph& model, double sparsity);
std::pair<SparsityMask, PruneReport> prune_global(const ModelGraph& model, double sparsity);

// 1x4 blocks along the input axis of the (out, in) weight view; the trailing
// block of a row is shorter when in % 4 != 0. Block score is the L1 norm.
std::pair<SparsityMask, PruneReport> prune_block(const ModelGraph& model, double sparsity);

// Masked weights become exactly 0.0f; everything else is bit-identical.
ModelGraph apply_mask(const ModelGraph& model, const SparsityMask& mask);

// Reports exact-zero fractions of the weight buffer as stored.
PruneReport measure_sparsity(const ModelGraph& model);

// Throws ValidationError unless every mask entry names a prunable layer with a
// matching bitset length.
void validate_mask(const ModelGraph& model, const SparsityMask& mask);

// Block-mode invariant: zeros only in whole aligned 1x4 blocks.
void validate_block_alignment(const ModelGraph& model, const SparsityMask& mask);

}  // namespace prunekit
