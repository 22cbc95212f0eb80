#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "prunekit/common.hpp"

namespace prunekit {

// Compressed 1x4 block-sparse storage for an int8 weight matrix, BSR-style:
// row_ptr has rows+1 entries, block_cols[i] is the block-column index of the
// i-th stored block (column range [4*bc, 4*bc+4)), values holds 4 int8 per
// block. A tail block that runs past the matrix edge is zero-padded to 4.
struct BlockSparseMatrix {
    int rows = 0;
    int cols = 0;
    std::pair<int, int> block_shape{1, 4};
    std::vector<std::int32_t> row_ptr;
    std::vector<std::int32_t> block_cols;
    std::vector<std::int8_t> values;

    std::int64_t block_count() const { return std::ssize(block_cols); }

    // Dense row-major reconstruction; absent blocks are zero.
    std::vector<std::int8_t> to_dense() const;

    // Per-row sum of stored quantized weights (for activation zero-point
    // correction during requantization).
    std::vector<std::int32_t> row_sums() const;
};

// Builds block-sparse storage from a dense int8 matrix and its kept-weight
// mask (1 = kept). The mask must be constant within every 1x4 block; a block
// straddling mixed mask values is a ValidationError. Exactly the kept blocks
// are stored, in row-major block order.
BlockSparseMatrix to_block_sparse(std::span<const std::int8_t> dense, int rows, int cols,
                                  std::span<const std::uint8_t> mask);

}  // namespace prunekit
