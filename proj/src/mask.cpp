#include "prunekit/mask.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

using nlohmann::json;

namespace prunekit {

const char* to_string(PruneMethod m) {
    switch (m) {
        case PruneMethod::global_magnitude: return "global_magnitude";
        case PruneMethod::uniform_magnitude: return "uniform_magnitude";
        case PruneMethod::block_magnitude: return "block_magnitude";
    }
    return "?";
}

PruneMethod prune_method_from_string(const std::string& s) {
    if (s == "global_magnitude" || s == "global") return PruneMethod::global_magnitude;
    if (s == "uniform_magnitude" || s == "uniform") return PruneMethod::uniform_magnitude;
    if (s == "block_magnitude" || s == "block") return PruneMethod::block_magnitude;
    throw ValidationError("unknown prune method '" + s + "'");
}

std::uint64_t SparsityMask::kept_count(const std::string& layer) const {
    auto it = per_layer.find(layer);
    if (it == per_layer.end()) throw ValidationError("mask has no layer '" + layer + "'");
    return static_cast<std::uint64_t>(std::count(it->second.begin(), it->second.end(), 1));
}

std::uint64_t SparsityMask::pruned_count(const std::string& layer) const {
    auto it = per_layer.find(layer);
    if (it == per_layer.end()) throw ValidationError("mask has no layer '" + layer + "'");
    return it->second.size() - kept_count(layer);
}

namespace {

std::vector<std::uint8_t> pack_bits(const std::vector<std::uint8_t>& bits) {
    std::vector<std::uint8_t> bytes((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) bytes[i / 8] |= std::uint8_t(1u << (i % 8));
    return bytes;
}

std::vector<std::uint8_t> unpack_bits(const std::vector<std::uint8_t>& bytes, std::size_t n) {
    if (bytes.size() != (n + 7) / 8)
        throw ValidationError("mask bitstream length does not match declared length");
    std::vector<std::uint8_t> bits(n);
    for (std::size_t i = 0; i < n; ++i) bits[i] = (bytes[i / 8] >> (i % 8)) & 1u;
    return bits;
}

}  // namespace

void save_mask(const SparsityMask& mask, const std::string& path, const std::string& config_hash) {
    json j;
    j["meta"] = {{"toolkit_version", kToolkitVersion}, {"config_hash", config_hash}};
    j["method"] = to_string(mask.method);
    if (mask.block_shape)
        j["block_shape"] = {mask.block_shape->first, mask.block_shape->second};
    j["layers"] = json::array();
    for (const auto& [name, bits] : mask.per_layer) {
        const auto bytes = pack_bits(bits);
        j["layers"].push_back({{"name", name},
                               {"length", bits.size()},
                               {"bits", base64_encode(bytes.data(), bytes.size())}});
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open mask file '" + path + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw Error("failed writing mask file '" + path + "'");
}

SparsityMask load_mask(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open mask file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("malformed mask file '" + path + "': " + e.what());
    }
    if (!j.is_object() || !j.contains("method") || !j.contains("layers"))
        throw ValidationError("mask file must carry 'method' and 'layers'");
    SparsityMask mask;
    mask.method = prune_method_from_string(j["method"].get<std::string>());
    if (j.contains("block_shape")) {
        const auto& bs = j["block_shape"];
        if (!bs.is_array() || bs.size() != 2)
            throw ValidationError("mask block_shape must be a [rows, cols] pair");
        mask.block_shape = {bs[0].get<int>(), bs[1].get<int>()};
    }
    for (const json& lj : j["layers"]) {
        const auto name = lj.at("name").get<std::string>();
        const auto length = lj.at("length").get<std::size_t>();
        const auto bytes = base64_decode(lj.at("bits").get<std::string>());
        if (!mask.per_layer.emplace(name, unpack_bits(bytes, length)).second)
            throw ValidationError("mask file repeats layer '" + name + "'");
    }
    return mask;
}

}  // namespace prunekit
