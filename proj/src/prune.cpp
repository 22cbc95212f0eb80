#include "prunekit/prune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace prunekit {

namespace {

void check_sparsity_arg(double s) {
    if (!(s >= 0.0 && s <= 1.0))
        throw ValidationError("sparsity must lie in [0, 1], got " + std::to_string(s));
}

std::int64_t round_count(double s, std::int64_t n) {
    return std::llround(s * static_cast<double>(n));
}

void check_finite_weights(const ModelGraph& model, const LayerSpec& l) {
    for (float w : model.weight_span(l))
        if (!std::isfinite(w))
            throw ValidationError("layer '" + l.name + "' holds non-finite weights");
}

std::vector<const LayerSpec*> prunable_layers(const ModelGraph& model) {
    std::vector<const LayerSpec*> out;
    for (const LayerSpec& l : model.layers)
        if (l.prunable) out.push_back(&l);
    return out;
}

SparsityMask all_ones_mask(const std::vector<const LayerSpec*>& layers, PruneMethod method) {
    SparsityMask mask;
    mask.method = method;
    for (const LayerSpec* l : layers)
        mask.per_layer.emplace(l->name, std::vector<std::uint8_t>(l->weight_len, 1));
    return mask;
}

void finish_report(const ModelGraph& model, const SparsityMask& mask, PruneReport& report) {
    std::uint64_t pruned_total = 0, prunable_total = 0, all_total = 0;
    for (const LayerSpec& l : model.layers) {
        all_total += static_cast<std::uint64_t>(l.weight_len);
        if (!l.prunable) continue;
        const auto& bits = mask.per_layer.at(l.name);
        const auto pruned = static_cast<std::uint64_t>(std::count(bits.begin(), bits.end(), 0));
        report.per_layer_sparsity[l.name] =
            l.weight_len == 0 ? 0.0 : double(pruned) / double(l.weight_len);
        pruned_total += pruned;
        prunable_total += static_cast<std::uint64_t>(l.weight_len);
    }
    report.overall_prunable_sparsity =
        prunable_total == 0 ? 0.0 : double(pruned_total) / double(prunable_total);
    report.overall_model_sparsity = all_total == 0 ? 0.0 : double(pruned_total) / double(all_total);
}

}  // namespace

std::pair<SparsityMask, PruneReport> prune_uniform(const ModelGraph& model, double sparsity) {
    check_sparsity_arg(sparsity);
    const auto layers = prunable_layers(model);
    SparsityMask mask = all_ones_mask(layers, PruneMethod::uniform_magnitude);
    PruneReport report;
    report.method = PruneMethod::uniform_magnitude;
    for (const LayerSpec* l : layers) {
        check_finite_weights(model, *l);
        const auto w = model.weight_span(*l);
        const std::int64_t n = l->weight_len;
        const std::int64_t k = round_count(sparsity, n);
        std::vector<std::int64_t> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
            const float ma = std::fabs(w[static_cast<std::size_t>(a)]);
            const float mb = std::fabs(w[static_cast<std::size_t>(b)]);
            return ma != mb ? ma < mb : a < b;
        });
        auto& bits = mask.per_layer.at(l->name);
        for (std::int64_t i = 0; i < k; ++i) bits[static_cast<std::size_t>(order[i])] = 0;
    }
    finish_report(model, mask, report);
    return {std::move(mask), std::move(report)};
}

std::pair<SparsityMask, PruneReport> prune_global(const ModelGraph& model, double sparsity) {
    check_sparsity_arg(sparsity);
    const auto layers = prunable_layers(model);
    if (layers.empty()) throw ValidationError("model has no prunable layers");
    struct Entry {
        float magnitude;
        std::int32_t layer;
        std::int64_t index;
    };
    std::vector<Entry> entries;
    std::size_t total = 0;
    for (const LayerSpec* l : layers) total += static_cast<std::size_t>(l->weight_len);
    entries.reserve(total);
    for (std::size_t li = 0; li < layers.size(); ++li) {
        check_finite_weights(model, *layers[li]);
        const auto w = model.weight_span(*layers[li]);
        for (std::int64_t i = 0; i < layers[li]->weight_len; ++i)
            entries.push_back({std::fabs(w[static_cast<std::size_t>(i)]),
                               static_cast<std::int32_t>(li), i});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return std::tie(a.magnitude, a.layer, a.index) < std::tie(b.magnitude, b.layer, b.index);
    });
    const std::int64_t k = round_count(sparsity, static_cast<std::int64_t>(entries.size()));
    SparsityMask mask = all_ones_mask(layers, PruneMethod::global_magnitude);
    for (std::int64_t i = 0; i < k; ++i) {
        const Entry& e = entries[static_cast<std::size_t>(i)];
        mask.per_layer.at(layers[static_cast<std::size_t>(e.layer)]->name)
            [static_cast<std::size_t>(e.index)] = 0;
    }
    PruneReport report;
    report.method = PruneMethod::global_magnitude;
    report.threshold = k > 0 ? entries[static_cast<std::size_t>(k - 1)].magnitude : 0.0;
    finish_report(model, mask, report);
    return {std::move(mask), std::move(report)};
}

std::pair<SparsityMask, PruneReport> prune_block(const ModelGraph& model, double sparsity) {
    check_sparsity_arg(sparsity);
    const auto layers = prunable_layers(model);
    SparsityMask mask = all_ones_mask(layers, PruneMethod::block_magnitude);
    mask.block_shape = {1, kBlockCols};
    PruneReport report;
    report.method = PruneMethod::block_magnitude;
    for (const LayerSpec* l : layers) {
        check_finite_weights(model, *l);
        const auto w = model.weight_span(*l);
        const std::int64_t rows = l->out_channels;
        const std::int64_t cols = l->weight_len / l->out_channels;
        const std::int64_t blocks_per_row = (cols + kBlockCols - 1) / kBlockCols;
        struct Block {
            double score;
            std::int64_t row;
            std::int64_t block;
        };
        std::vector<Block> blocks;
        blocks.reserve(static_cast<std::size_t>(rows * blocks_per_row));
        for (std::int64_t r = 0; r < rows; ++r) {
            for (std::int64_t b = 0; b < blocks_per_row; ++b) {
                double score = 0.0;
                const std::int64_t end = std::min(cols, (b + 1) * kBlockCols);
                for (std::int64_t c = b * kBlockCols; c < end; ++c)
                    score += std::fabs(double(w[static_cast<std::size_t>(r * cols + c)]));
                blocks.push_back({score, r, b});
            }
        }
        std::sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) {
            return std::tie(a.score, a.row, a.block) < std::tie(b.score, b.row, b.block);
        });
        const std::int64_t k = round_count(sparsity, static_cast<std::int64_t>(blocks.size()));
        auto& bits = mask.per_layer.at(l->name);
        for (std::int64_t i = 0; i < k; ++i) {
            const Block& blk = blocks[static_cast<std::size_t>(i)];
            const std::int64_t end = std::min(cols, (blk.block + 1) * kBlockCols);
            for (std::int64_t c = blk.block * kBlockCols; c < end; ++c)
                bits[static_cast<std::size_t>(blk.row * cols + c)] = 0;
        }
    }
    finish_report(model, mask, report);
    return {std::move(mask), std::move(report)};
}

void validate_mask(const ModelGraph& model, const SparsityMask& mask) {
    for (const auto& [name, bits] : mask.per_layer) {
        const int idx = model.layer_index(name);
        if (idx < 0) throw ValidationError("mask names unknown layer '" + name + "'");
        const LayerSpec& l = model.layers[static_cast<std::size_t>(idx)];
        if (!l.prunable) throw ValidationError("mask covers non-prunable layer '" + name + "'");
        if (static_cast<std::int64_t>(bits.size()) != l.weight_len)
            throw ValidationError("mask length " + std::to_string(bits.size()) +
                                  " does not match weight_len of layer '" + name + "'");
    }
}

void validate_block_alignment(const ModelGraph& model, const SparsityMask& mask) {
    validate_mask(model, mask);
    for (const auto& [name, bits] : mask.per_layer) {
        const LayerSpec& l = model.layer(name);
        const std::int64_t cols = l.weight_len / l.out_channels;
        for (std::int64_t r = 0; r < l.out_channels; ++r) {
            for (std::int64_t b = 0; b * kBlockCols < cols; ++b) {
                const std::int64_t end = std::min(cols, (b + 1) * kBlockCols);
                const std::size_t first =
                    static_cast<std::size_t>(r * cols + b * kBlockCols);
                for (std::int64_t c = b * kBlockCols + 1; c < end; ++c)
                    if (bits[static_cast<std::size_t>(r * cols + c)] != bits[first])
                        throw ValidationError("mask of layer '" + name +
                                              "' splits a 1x4 block at row " + std::to_string(r));
            }
        }
    }
}

ModelGraph apply_mask(const ModelGraph& model, const SparsityMask& mask) {
    validate_mask(model, mask);
    ModelGraph out = model;
    for (const auto& [name, bits] : mask.per_layer) {
        auto w = out.weight_span(out.layer(name));
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (!bits[i]) w[i] = 0.0f;
    }
    return out;
}

PruneReport measure_sparsity(const ModelGraph& model) {
    PruneReport report;
    std::uint64_t prunable_zero = 0, prunable_total = 0, all_zero = 0, all_total = 0;
    for (const LayerSpec& l : model.layers) {
        const auto w = model.weight_span(l);
        const auto zeros =
            static_cast<std::uint64_t>(std::count(w.begin(), w.end(), 0.0f));
        all_zero += zeros;
        all_total += static_cast<std::uint64_t>(l.weight_len);
        if (!l.prunable) continue;
        report.per_layer_sparsity[l.name] =
            l.weight_len == 0 ? 0.0 : double(zeros) / double(l.weight_len);
        prunable_zero += zeros;
        prunable_total += static_cast<std::uint64_t>(l.weight_len);
    }
    report.overall_prunable_sparsity =
        prunable_total == 0 ? 0.0 : double(prunable_zero) / double(prunable_total);
    report.overall_model_sparsity = all_total == 0 ? 0.0 : double(all_zero) / double(all_total);
    return report;
}

}  // namespace prunekit
