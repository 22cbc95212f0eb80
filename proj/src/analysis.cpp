#include "prunekit/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "prunekit/prune.hpp"
#include "prunekit/train.hpp"

namespace prunekit {

double quantile(std::span<const double> values, double q) {
    if (values.empty()) throw ValidationError("quantile of an empty sample");
    if (q < 0.0 || q > 1.0) throw ValidationError("quantile fraction must be in [0, 1]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

SensitivityReport layer_sensitivity(const ModelGraph& model, const Dataset& eval_set, double s) {
    // One mask computed for all layers; its per-layer slices are independent,
    // so slice L doubles as "prune only layer L".
    const auto [mask, report] = prune_uniform(model, s);
    (void)report;

    std::vector<std::size_t> prunable;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        if (model.layers[i].prunable) prunable.push_back(i);
    }

    SensitivityReport out;
    out.sparsity_used = s;
    out.baseline_top1 = evaluate(model, eval_set).top1;
    out.per_layer.resize(prunable.size());

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto probe = [&]() {
        try {
            for (std::size_t j = next.fetch_add(1); j < prunable.size(); j = next.fetch_add(1)) {
                const std::size_t li = prunable[j];
                const LayerSpec& layer = model.layers[li];
                ModelGraph probe_model = model;
                const std::vector<std::uint8_t>& bits = mask.per_layer.at(layer.name);
                for (std::int64_t k = 0; k < layer.weight_len; ++k) {
                    if (bits[static_cast<std::size_t>(k)] == 0) {
                        probe_model.weights[static_cast<std::size_t>(layer.weight_offset + k)] =
                            0.0f;
                    }
                }
                out.per_layer[j] = {layer.name, layer.role, evaluate(probe_model, eval_set).top1};
            }
        } catch (...) {
            const std::scoped_lock lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(thread_budget()), prunable.size());
    if (workers <= 1) {
        probe();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(probe);
        for (std::thread& t : threads) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::map<std::string, std::vector<double>> grouped;
    for (const SensitivityEntry& e : out.per_layer) grouped[to_string(e.role)].push_back(e.top1);
    for (const auto& [role, values] : grouped) {
        out.by_role[role] = {quantile(values, 0.0), quantile(values, 0.25), quantile(values, 0.5),
                             quantile(values, 0.75), quantile(values, 1.0)};
    }
    return out;
}

SparsityPattern sparsity_pattern(const SparsityMask& mask, const ModelGraph& model) {
    validate_mask(model, mask);
    SparsityPattern pattern;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const LayerSpec& layer = model.layers[i];
        if (!layer.prunable) continue;
        // Layers absent from the mask are dense, same as everywhere else.
        double sparsity = 0.0;
        if (auto it = mask.per_layer.find(layer.name); it != mask.per_layer.end()) {
            const std::int64_t pruned =
                std::count(it->second.begin(), it->second.end(), static_cast<std::uint8_t>(0));
            sparsity = static_cast<double>(pruned) / static_cast<double>(it->second.size());
        }
        pattern.entries.push_back({layer.name, static_cast<int>(i), layer.role, sparsity});
    }
    return pattern;
}

double gpu_hours(int nodes, int gpus_per_node, double hours_to_convergence) {
    if (nodes <= 0 || gpus_per_node <= 0 || !(hours_to_convergence > 0.0)) {
        throw ValidationError("gpu_hours requires positive nodes, GPUs per node, and hours");
    }
    return static_cast<double>(nodes) * static_cast<double>(gpus_per_node) * hours_to_convergence;
}

double speedup(double baseline_gpu_hours, double ours_gpu_hours) {
    if (!(baseline_gpu_hours > 0.0) || !(ours_gpu_hours > 0.0)) {
        throw ValidationError("speedup requires positive GPU-hour totals");
    }
    return baseline_gpu_hours / ours_gpu_hours;
}

}  // namespace prunekit
