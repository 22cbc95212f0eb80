#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prunekit/common.hpp"
#include "prunekit/mask.hpp"

namespace prunekit {

enum class OpKind { conv2d, linear, relu, global_avg_pool, add, flatten };
// pw = pointwise expansion, pwl = pointwise bottleneck, se = squeeze-excitation.
enum class Role { pw, pwl, se, dw, other };

const char* to_string(OpKind k);
OpKind op_kind_from_string(const std::string& s);
const char* to_string(Role r);
Role role_from_string(const std::string& s);

struct LayerSpec {
    std::string name;
    OpKind op_kind = OpKind::conv2d;
    Role role = Role::other;
    std::int64_t in_channels = 1;
    std::int64_t out_channels = 1;
    std::int64_t kernel_h = 1;
    std::int64_t kernel_w = 1;
    std::int64_t stride = 1;
    std::int64_t groups = 1;
    std::int64_t input_h = 1;
    std::int64_t input_w = 1;
    // Buffer coordinates in float elements, not bytes.
    std::int64_t weight_offset = 0;
    std::int64_t weight_len = 0;
    std::int64_t bias_offset = 0;
    std::int64_t bias_len = 0;
    bool prunable = false;

    // Same-padding output size: out = ceil(input / stride).
    std::int64_t out_h() const { return (input_h - 1) / stride + 1; }
    std::int64_t out_w() const { return (input_w - 1) / stride + 1; }
    bool has_weights() const { return weight_len > 0; }
};

// Ordered layer list plus one contiguous float32 weight buffer. Immutable by
// convention once loaded; every mutating operation returns a new value, so a
// graph can be shared across threads for read-only work.
struct ModelGraph {
    std::string name;
    std::vector<LayerSpec> layers;
    std::vector<float> weights;

    int layer_index(const std::string& layer_name) const;  // -1 if absent
    const LayerSpec& layer(const std::string& layer_name) const;
    std::span<const float> weight_span(const LayerSpec& l) const;
    std::span<float> weight_span(const LayerSpec& l);
    std::span<const float> bias_span(const LayerSpec& l) const;
    std::span<float> bias_span(const LayerSpec& l);
};

// Throws ValidationError naming the offending layer and field.
void validate_model(const ModelGraph& model);

struct FlopsReport {
    // Depth order, one entry per layer. Counts are multiply-accumulates.
    std::vector<std::pair<std::string, std::uint64_t>> per_layer;
    std::uint64_t total = 0;
    std::uint64_t prunable_total = 0;
    std::optional<std::uint64_t> effective_total;
    std::vector<std::pair<std::string, std::uint64_t>> effective_per_layer;
};

// Optional manifest "meta" object; carries provenance, never semantics.
struct ModelMeta {
    std::string toolkit_version;
    std::string config_hash;
};

// Manifest: UTF-8 JSON {name, layers:[...]} with LayerSpec field names, plus an
// optional "meta" object. Strict mode rejects unknown fields. Weights blob:
// headerless little-endian float32 stream addressed by manifest offsets; the
// file length must equal the highest offset+len over all regions.
ModelGraph load_model(const std::string& manifest_path, const std::string& weights_path,
                      bool strict = true);
void save_model(const ModelGraph& model, const std::string& manifest_path,
                const std::string& weights_path,
                const std::optional<ModelMeta>& meta = std::nullopt);

// Dense MACs of one layer. conv2d: out_h*out_w*out_c*(in_c/groups)*kh*kw,
// linear: in_c*out_c, everything else 0.
std::uint64_t layer_flops(const LayerSpec& layer);

// MACs saved per pruned weight: out_h*out_w for conv layers, 1 for linear.
std::uint64_t layer_weight_multiplier(const LayerSpec& layer);

// Dense and (with a mask) effective MACs. Effective MACs of a masked layer are
// kept_weights * layer_weight_multiplier, which equals
// (kept/total) * dense exactly.
FlopsReport model_flops(const ModelGraph& model, const SparsityMask* mask = nullptr);

// Rewrites a stride-1 pointwise conv as a linear layer over the same weight
// region; the executor applies linear layers per spatial position, so forward
// outputs are bit-identical.
ModelGraph conv1x1_to_linear(const ModelGraph& model, const std::string& layer_name);

}  // namespace prunekit
