#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "prunekit/common.hpp"

namespace prunekit {

enum class PruneMethod { global_magnitude, uniform_magnitude, block_magnitude };

const char* to_string(PruneMethod m);
PruneMethod prune_method_from_string(const std::string& s);

// Per-layer keep/remove pattern over the flat weight buffer of each prunable
// layer. 1 = kept, 0 = pruned. Only prunable layers may appear.
struct SparsityMask {
    PruneMethod method = PruneMethod::uniform_magnitude;
    std::optional<std::pair<int, int>> block_shape;  // (1,4) in block mode
    std::map<std::string, std::vector<std::uint8_t>> per_layer;

    std::uint64_t kept_count(const std::string& layer) const;
    std::uint64_t pruned_count(const std::string& layer) const;
};

// Mask file: JSON envelope {method, block_shape?, layers:[{name,length,bits}]}
// where bits is the base64 of the bitstream packed LSB-first (bit j of byte i
// is flat index 8*i+j; 1 = kept). An optional "meta" object carries
// toolkit_version and config_hash.
void save_mask(const SparsityMask& mask, const std::string& path,
               const std::string& config_hash = "");
SparsityMask load_mask(const std::string& path);

}  // namespace prunekit
