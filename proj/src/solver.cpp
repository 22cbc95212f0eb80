#include "prunekit/solver.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "prunekit/prune.hpp"

namespace prunekit {

void validate_flops_target(const FlopsTarget& t) {
    if (!(t.seed_total_mflops > 0.0))
        throw ValidationError("seed FLOPs must be positive");
    if (!(t.target_total_mflops > 0.0))
        throw ValidationError("target FLOPs must be positive");
    if (t.target_total_mflops > t.seed_total_mflops)
        throw InfeasibleError("target " + std::to_string(t.target_total_mflops) +
                              " MFLOPs exceeds seed total " +
                              std::to_string(t.seed_total_mflops));
    if (!(t.prunable_mflops > 0.0))
        throw ValidationError("prunable FLOPs must be positive");
    if (t.prunable_mflops > t.seed_total_mflops)
        throw InfeasibleError("prunable FLOPs " + std::to_string(t.prunable_mflops) +
                              " exceed the seed total " + std::to_string(t.seed_total_mflops));
}

double solve_uniform(const FlopsTarget& target) {
    validate_flops_target(target);
    const double s =
        (target.seed_total_mflops - target.target_total_mflops) / target.prunable_mflops;
    if (s > 1.0)
        throw InfeasibleError("target requires sparsity " + std::to_string(s) +
                              " > 1; unreachable by pruning the prunable layers alone");
    if (s < 0.0)
        throw InfeasibleError("target exceeds the seed total (sparsity " + std::to_string(s) +
                              " < 0)");
    return s;
}

double invert_prunable_mflops(double seed_total_mflops, double target_total_mflops,
                              double sparsity) {
    if (!(sparsity > 0.0))
        throw ValidationError("sparsity must be positive to invert the uniform formula");
    return (seed_total_mflops - target_total_mflops) / sparsity;
}

std::pair<SolveResult, SparsityMask> solve_global_macs(const ModelGraph& model,
                                                       std::uint64_t target_macs) {
    if (target_macs == 0) throw ValidationError("target FLOPs must be positive");
    struct Entry {
        float magnitude;
        std::int32_t layer;
        std::int64_t index;
    };
    std::vector<Entry> entries;
    std::vector<const LayerSpec*> layers;
    for (const LayerSpec& l : model.layers)
        if (l.prunable) layers.push_back(&l);
    if (layers.empty()) throw ValidationError("model has no prunable layers");
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const auto w = model.weight_span(*layers[li]);
        for (std::int64_t i = 0; i < layers[li]->weight_len; ++i) {
            const float m = std::fabs(w[static_cast<std::size_t>(i)]);
            if (!std::isfinite(m))
                throw ValidationError("layer '" + layers[li]->name +
                                      "' holds non-finite weights");
            entries.push_back({m, static_cast<std::int32_t>(li), i});
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return std::tie(a.magnitude, a.layer, a.index) < std::tie(b.magnitude, b.layer, b.index);
    });

    SparsityMask mask;
    mask.method = PruneMethod::global_magnitude;
    for (const LayerSpec* l : layers)
        mask.per_layer.emplace(l->name, std::vector<std::uint8_t>(l->weight_len, 1));

    std::vector<std::uint64_t> multiplier(layers.size());
    for (std::size_t li = 0; li < layers.size(); ++li)
        multiplier[li] = layer_weight_multiplier(*layers[li]);

    std::uint64_t achieved = model_flops(model).total;
    std::uint64_t k = 0;
    double threshold = 0.0;
    while (achieved > target_macs) {
        if (k == entries.size())
            throw InfeasibleError("pruning all " + std::to_string(entries.size()) +
                                  " prunable weights still leaves " + std::to_string(achieved) +
                                  " MACs above the target " + std::to_string(target_macs));
        const Entry& e = entries[static_cast<std::size_t>(k)];
        mask.per_layer.at(layers[static_cast<std::size_t>(e.layer)]->name)
            [static_cast<std::size_t>(e.index)] = 0;
        achieved -= multiplier[static_cast<std::size_t>(e.layer)];
        threshold = e.magnitude;
        ++k;
    }

    SolveResult result;
    result.pruned_weights = k;
    result.sparsity = entries.empty() ? 0.0 : double(k) / double(entries.size());
    result.threshold = k > 0 ? threshold : 0.0;
    result.achieved_macs = achieved;
    result.achieved_mflops = macs_to_mflops(achieved);
    for (const LayerSpec* l : layers) {
        const auto& bits = mask.per_layer.at(l->name);
        const auto pruned = static_cast<double>(std::count(bits.begin(), bits.end(), 0));
        result.per_layer_sparsity[l->name] =
            l->weight_len == 0 ? 0.0 : pruned / double(l->weight_len);
    }
    return {std::move(result), std::move(mask)};
}

std::pair<SolveResult, SparsityMask> solve_global(const ModelGraph& model,
                                                  double target_total_mflops) {
    if (!(target_total_mflops > 0.0)) throw ValidationError("target FLOPs must be positive");
    return solve_global_macs(model, mflops_to_macs(target_total_mflops));
}

VerifyResult verify_mask_flops(const ModelGraph& model, const SparsityMask& mask,
                               double target_total_mflops) {
    validate_mask(model, mask);
    const FlopsReport report = model_flops(model, &mask);
    VerifyResult out;
    out.achieved_macs = report.effective_total.value_or(report.total);
    out.achieved_mflops = macs_to_mflops(out.achieved_macs);
    out.ok = out.achieved_macs <= mflops_to_macs(target_total_mflops);
    return out;
}

}  // namespace prunekit
