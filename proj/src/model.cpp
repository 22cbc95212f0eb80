#include "prunekit/model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <unordered_set>

#include "json.hpp"

using nlohmann::json;

namespace prunekit {

const char* to_string(OpKind k) {
    switch (k) {
        case OpKind::conv2d: return "conv2d";
        case OpKind::linear: return "linear";
        case OpKind::relu: return "relu";
        case OpKind::global_avg_pool: return "global_avg_pool";
        case OpKind::add: return "add";
        case OpKind::flatten: return "flatten";
    }
    return "?";
}

OpKind op_kind_from_string(const std::string& s) {
    if (s == "conv2d") return OpKind::conv2d;
    if (s == "linear") return OpKind::linear;
    if (s == "relu") return OpKind::relu;
    if (s == "global_avg_pool") return OpKind::global_avg_pool;
    if (s == "add") return OpKind::add;
    if (s == "flatten") return OpKind::flatten;
    throw ValidationError("unknown op_kind '" + s + "'");
}

const char* to_string(Role r) {
    switch (r) {
        case Role::pw: return "pw";
        case Role::pwl: return "pwl";
        case Role::se: return "se";
        case Role::dw: return "dw";
        case Role::other: return "other";
    }
    return "?";
}

Role role_from_string(const std::string& s) {
    if (s == "pw") return Role::pw;
    if (s == "pwl") return Role::pwl;
    if (s == "se") return Role::se;
    if (s == "dw") return Role::dw;
    if (s == "other") return Role::other;
    throw ValidationError("unknown role '" + s + "'");
}

int ModelGraph::layer_index(const std::string& layer_name) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].name == layer_name) return static_cast<int>(i);
    return -1;
}

const LayerSpec& ModelGraph::layer(const std::string& layer_name) const {
    const int idx = layer_index(layer_name);
    if (idx < 0) throw ValidationError("no layer named '" + layer_name + "'");
    return layers[static_cast<std::size_t>(idx)];
}

std::span<const float> ModelGraph::weight_span(const LayerSpec& l) const {
    return {weights.data() + l.weight_offset, static_cast<std::size_t>(l.weight_len)};
}

std::span<float> ModelGraph::weight_span(const LayerSpec& l) {
    return {weights.data() + l.weight_offset, static_cast<std::size_t>(l.weight_len)};
}

std::span<const float> ModelGraph::bias_span(const LayerSpec& l) const {
    return {weights.data() + l.bias_offset, static_cast<std::size_t>(l.bias_len)};
}

std::span<float> ModelGraph::bias_span(const LayerSpec& l) {
    return {weights.data() + l.bias_offset, static_cast<std::size_t>(l.bias_len)};
}

namespace {

[[noreturn]] void layer_error(const LayerSpec& l, const std::string& what) {
    throw ValidationError("layer '" + l.name + "': " + what);
}

void validate_layer(const LayerSpec& l) {
    auto require_positive = [&](std::int64_t v, const char* field) {
        if (v <= 0) layer_error(l, std::string(field) + " must be positive");
    };
    require_positive(l.in_channels, "in_channels");
    require_positive(l.out_channels, "out_channels");
    require_positive(l.kernel_h, "kernel_h");
    require_positive(l.kernel_w, "kernel_w");
    require_positive(l.stride, "stride");
    require_positive(l.groups, "groups");
    require_positive(l.input_h, "input_h");
    require_positive(l.input_w, "input_w");
    if (l.weight_offset < 0 || l.weight_len < 0 || l.bias_offset < 0 || l.bias_len < 0)
        layer_error(l, "negative buffer coordinate");

    switch (l.op_kind) {
        case OpKind::conv2d: {
            if (l.in_channels % l.groups != 0)
                layer_error(l, "in_channels not divisible by groups");
            if (l.out_channels % l.groups != 0)
                layer_error(l, "out_channels not divisible by groups");
            const std::int64_t expect =
                l.out_channels * (l.in_channels / l.groups) * l.kernel_h * l.kernel_w;
            if (l.weight_len != expect)
                layer_error(l, "weight_len " + std::to_string(l.weight_len) +
                                   " does not match shape product " + std::to_string(expect));
            if (l.bias_len != 0 && l.bias_len != l.out_channels)
                layer_error(l, "bias_len must be 0 or out_channels");
            const bool pointwise = l.kernel_h == 1 && l.kernel_w == 1 && l.groups == 1;
            if (l.prunable != pointwise)
                layer_error(l, pointwise ? "1x1 conv with groups==1 must be prunable"
                                         : "prunable requires a 1x1 conv with groups==1");
            break;
        }
        case OpKind::linear: {
            if (l.weight_len != l.in_channels * l.out_channels)
                layer_error(l, "weight_len does not match in_channels*out_channels");
            if (l.bias_len != 0 && l.bias_len != l.out_channels)
                layer_error(l, "bias_len must be 0 or out_channels");
            if (l.kernel_h != 1 || l.kernel_w != 1 || l.groups != 1 || l.stride != 1)
                layer_error(l, "linear layers must declare kernel 1x1, stride 1, groups 1");
            break;
        }
        case OpKind::relu:
        case OpKind::add:
        case OpKind::global_avg_pool:
            if (l.in_channels != l.out_channels)
                layer_error(l, "in_channels must equal out_channels");
            [[fallthrough]];
        case OpKind::flatten:
            if (l.op_kind == OpKind::flatten &&
                l.out_channels != l.in_channels * l.input_h * l.input_w)
                layer_error(l, "flatten out_channels must be in_channels*input_h*input_w");
            if (l.weight_len != 0 || l.bias_len != 0)
                layer_error(l, "weights on a non-weighted op");
            if (l.prunable) layer_error(l, "prunable requires a 1x1 conv or linear layer");
            break;
    }
    if ((l.role == Role::pw || l.role == Role::pwl || l.role == Role::se) &&
        (l.kernel_h != 1 || l.kernel_w != 1))
        layer_error(l, "role " + std::string(to_string(l.role)) + " requires a 1x1 kernel");
}

}  // namespace

void validate_model(const ModelGraph& model) {
    std::unordered_set<std::string> names;
    std::vector<std::pair<std::int64_t, std::int64_t>> regions;
    const auto buffer_len = static_cast<std::int64_t>(model.weights.size());
    for (const LayerSpec& l : model.layers) {
        if (l.name.empty()) throw ValidationError("layer with empty name");
        if (!names.insert(l.name).second)
            throw ValidationError("duplicate layer name '" + l.name + "'");
        validate_layer(l);
        for (auto [off, len] : {std::pair{l.weight_offset, l.weight_len},
                                std::pair{l.bias_offset, l.bias_len}}) {
            if (len == 0) continue;
            if (off + len > buffer_len)
                layer_error(l, "region [" + std::to_string(off) + ", " +
                                   std::to_string(off + len) + ") exceeds buffer length " +
                                   std::to_string(buffer_len));
            regions.emplace_back(off, off + len);
        }
    }
    std::sort(regions.begin(), regions.end());
    for (std::size_t i = 1; i < regions.size(); ++i)
        if (regions[i].first < regions[i - 1].second)
            throw ValidationError("overlapping weight regions at offset " +
                                  std::to_string(regions[i].first));
}

namespace {

const std::set<std::string> kLayerFields = {
    "name",        "op_kind",      "role",        "in_channels", "out_channels", "kernel_h",
    "kernel_w",    "stride",       "groups",      "input_h",     "input_w",      "weight_offset",
    "weight_len",  "bias_offset",  "bias_len",    "prunable"};

std::int64_t get_int(const json& j, const std::string& layer, const char* field) {
    auto it = j.find(field);
    if (it == j.end())
        throw ValidationError("layer '" + layer + "': missing field '" + field + "'");
    if (!it->is_number_integer())
        throw ValidationError("layer '" + layer + "': field '" + field + "' must be an integer");
    return it->get<std::int64_t>();
}

std::string get_string(const json& j, const std::string& layer, const char* field) {
    auto it = j.find(field);
    if (it == j.end())
        throw ValidationError("layer '" + layer + "': missing field '" + field + "'");
    if (!it->is_string())
        throw ValidationError("layer '" + layer + "': field '" + field + "' must be a string");
    return it->get<std::string>();
}

LayerSpec parse_layer(const json& j, bool strict) {
    if (!j.is_object()) throw ValidationError("layer entry is not an object");
    const std::string name = j.contains("name") && j["name"].is_string()
                                 ? j["name"].get<std::string>()
                                 : std::string();
    if (name.empty()) throw ValidationError("layer with missing or empty name");
    if (strict) {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!kLayerFields.count(it.key()))
                throw ValidationError("layer '" + name + "': unknown field '" + it.key() +
                                      "' (use --lenient to ignore)");
    }
    LayerSpec l;
    l.name = name;
    l.op_kind = op_kind_from_string(get_string(j, name, "op_kind"));
    l.role = role_from_string(get_string(j, name, "role"));
    l.in_channels = get_int(j, name, "in_channels");
    l.out_channels = get_int(j, name, "out_channels");
    l.kernel_h = get_int(j, name, "kernel_h");
    l.kernel_w = get_int(j, name, "kernel_w");
    l.stride = get_int(j, name, "stride");
    l.groups = get_int(j, name, "groups");
    l.input_h = get_int(j, name, "input_h");
    l.input_w = get_int(j, name, "input_w");
    l.weight_offset = get_int(j, name, "weight_offset");
    l.weight_len = get_int(j, name, "weight_len");
    l.bias_offset = get_int(j, name, "bias_offset");
    l.bias_len = get_int(j, name, "bias_len");
    auto it = j.find("prunable");
    if (it == j.end() || !it->is_boolean())
        throw ValidationError("layer '" + name + "': missing boolean field 'prunable'");
    l.prunable = it->get<bool>();
    return l;
}

std::vector<float> read_weights_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open weights file '" + path + "'");
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0);
    if (bytes % 4 != 0)
        throw ValidationError("weights file '" + path + "' length is not a multiple of 4 bytes");
    std::vector<std::uint8_t> raw(bytes);
    if (bytes > 0) in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw ValidationError("failed reading weights file '" + path + "'");
    std::vector<float> out(bytes / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint32_t u = std::uint32_t(raw[4 * i]) | (std::uint32_t(raw[4 * i + 1]) << 8) |
                                (std::uint32_t(raw[4 * i + 2]) << 16) |
                                (std::uint32_t(raw[4 * i + 3]) << 24);
        out[i] = std::bit_cast<float>(u);
    }
    return out;
}

void write_weights_file(std::span<const float> weights, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open weights file '" + path + "' for writing");
    std::vector<std::uint8_t> raw(weights.size() * 4);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const auto u = std::bit_cast<std::uint32_t>(weights[i]);
        raw[4 * i] = std::uint8_t(u & 0xff);
        raw[4 * i + 1] = std::uint8_t((u >> 8) & 0xff);
        raw[4 * i + 2] = std::uint8_t((u >> 16) & 0xff);
        raw[4 * i + 3] = std::uint8_t((u >> 24) & 0xff);
    }
    if (!raw.empty())
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw Error("failed writing weights file '" + path + "'");
}

}  // namespace

ModelGraph load_model(const std::string& manifest_path, const std::string& weights_path,
                      bool strict) {
    std::ifstream in(manifest_path);
    if (!in) throw ValidationError("cannot open manifest '" + manifest_path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("malformed manifest '" + manifest_path + "': " + e.what());
    }
    if (!j.is_object() || !j.contains("name") || !j.contains("layers"))
        throw ValidationError("manifest must be an object with 'name' and 'layers'");
    if (strict) {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (it.key() != "name" && it.key() != "layers" && it.key() != "meta")
                throw ValidationError("manifest: unknown top-level field '" + it.key() +
                                      "' (use --lenient to ignore)");
    }
    if (!j["name"].is_string()) throw ValidationError("manifest 'name' must be a string");
    if (!j["layers"].is_array()) throw ValidationError("manifest 'layers' must be an array");

    ModelGraph model;
    model.name = j["name"].get<std::string>();
    for (const json& lj : j["layers"]) model.layers.push_back(parse_layer(lj, strict));
    model.weights = read_weights_file(weights_path);

    std::int64_t max_end = 0;
    for (const LayerSpec& l : model.layers) {
        max_end = std::max(max_end, l.weight_offset + l.weight_len);
        if (l.bias_len > 0) max_end = std::max(max_end, l.bias_offset + l.bias_len);
    }
    if (static_cast<std::int64_t>(model.weights.size()) != max_end)
        throw ValidationError("weights file holds " + std::to_string(model.weights.size()) +
                              " floats but the manifest addresses " + std::to_string(max_end));
    validate_model(model);
    return model;
}

void save_model(const ModelGraph& model, const std::string& manifest_path,
                const std::string& weights_path, const std::optional<ModelMeta>& meta) {
    validate_model(model);
    json j;
    j["name"] = model.name;
    if (meta) {
        j["meta"] = {{"toolkit_version", meta->toolkit_version},
                     {"config_hash", meta->config_hash}};
    }
    j["layers"] = json::array();
    for (const LayerSpec& l : model.layers) {
        j["layers"].push_back({{"name", l.name},
                               {"op_kind", to_string(l.op_kind)},
                               {"role", to_string(l.role)},
                               {"in_channels", l.in_channels},
                               {"out_channels", l.out_channels},
                               {"kernel_h", l.kernel_h},
                               {"kernel_w", l.kernel_w},
                               {"stride", l.stride},
                               {"groups", l.groups},
                               {"input_h", l.input_h},
                               {"input_w", l.input_w},
                               {"weight_offset", l.weight_offset},
                               {"weight_len", l.weight_len},
                               {"bias_offset", l.bias_offset},
                               {"bias_len", l.bias_len},
                               {"prunable", l.prunable}});
    }
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw Error("cannot open manifest '" + manifest_path + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw Error("failed writing manifest '" + manifest_path + "'");
    write_weights_file(model.weights, weights_path);
}

std::uint64_t layer_flops(const LayerSpec& l) {
    switch (l.op_kind) {
        case OpKind::conv2d:
            return std::uint64_t(l.out_h()) * std::uint64_t(l.out_w()) *
                   std::uint64_t(l.out_channels) * std::uint64_t(l.in_channels / l.groups) *
                   std::uint64_t(l.kernel_h) * std::uint64_t(l.kernel_w);
        case OpKind::linear:
            return std::uint64_t(l.in_channels) * std::uint64_t(l.out_channels);
        default:
            return 0;
    }
}

std::uint64_t layer_weight_multiplier(const LayerSpec& l) {
    switch (l.op_kind) {
        case OpKind::conv2d:
            return std::uint64_t(l.out_h()) * std::uint64_t(l.out_w());
        case OpKind::linear:
            return 1;
        default:
            return 0;
    }
}

FlopsReport model_flops(const ModelGraph& model, const SparsityMask* mask) {
    if (mask) {
        for (const auto& [name, bits] : mask->per_layer) {
            const int idx = model.layer_index(name);
            if (idx < 0) throw ValidationError("mask names unknown layer '" + name + "'");
            const LayerSpec& l = model.layers[static_cast<std::size_t>(idx)];
            if (!l.prunable)
                throw ValidationError("mask covers non-prunable layer '" + name + "'");
            if (static_cast<std::int64_t>(bits.size()) != l.weight_len)
                throw ValidationError("mask length mismatch for layer '" + name + "'");
        }
    }
    FlopsReport report;
    for (const LayerSpec& l : model.layers) {
        const std::uint64_t dense = layer_flops(l);
        report.per_layer.emplace_back(l.name, dense);
        report.total += dense;
        if (l.prunable) report.prunable_total += dense;
        if (mask) {
            std::uint64_t eff = dense;
            auto it = mask->per_layer.find(l.name);
            if (it != mask->per_layer.end()) {
                const std::uint64_t kept =
                    static_cast<std::uint64_t>(std::count(it->second.begin(), it->second.end(), 1));
                eff = kept * layer_weight_multiplier(l);
            }
            report.effective_per_layer.emplace_back(l.name, eff);
            report.effective_total = report.effective_total.value_or(0) + eff;
        }
    }
    if (mask && !report.effective_total) report.effective_total = 0;
    return report;
}

ModelGraph conv1x1_to_linear(const ModelGraph& model, const std::string& layer_name) {
    const int idx = model.layer_index(layer_name);
    if (idx < 0) throw ValidationError("no layer named '" + layer_name + "'");
    ModelGraph out = model;
    LayerSpec& l = out.layers[static_cast<std::size_t>(idx)];
    if (l.op_kind != OpKind::conv2d || l.kernel_h != 1 || l.kernel_w != 1 || l.groups != 1)
        throw ValidationError("layer '" + layer_name + "' is not a 1x1 conv with groups==1");
    if (l.stride != 1)
        throw ValidationError("layer '" + layer_name + "' has stride > 1; cannot fold spatial dims");
    l.op_kind = OpKind::linear;
    l.prunable = true;
    validate_model(out);
    return out;
}

}  // namespace prunekit
