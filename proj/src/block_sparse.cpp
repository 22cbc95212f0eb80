#include "prunekit/block_sparse.hpp"

#include <string>

namespace prunekit {

std::vector<std::int8_t> BlockSparseMatrix::to_dense() const {
    std::vector<std::int8_t> dense(static_cast<std::size_t>(rows) * cols, 0);
    for (int r = 0; r < rows; ++r) {
        for (std::int32_t bi = row_ptr[static_cast<std::size_t>(r)];
             bi < row_ptr[static_cast<std::size_t>(r) + 1]; ++bi) {
            const std::int64_t c0 = static_cast<std::int64_t>(block_cols[static_cast<std::size_t>(bi)]) * 4;
            const std::int8_t* v = values.data() + static_cast<std::size_t>(bi) * 4;
            for (int j = 0; j < 4 && c0 + j < cols; ++j) {
                dense[static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c0 + j)] = v[j];
            }
        }
    }
    return dense;
}

std::vector<std::int32_t> BlockSparseMatrix::row_sums() const {
    std::vector<std::int32_t> sums(static_cast<std::size_t>(rows), 0);
    for (int r = 0; r < rows; ++r) {
        std::int32_t s = 0;
        for (std::int32_t bi = row_ptr[static_cast<std::size_t>(r)];
             bi < row_ptr[static_cast<std::size_t>(r) + 1]; ++bi) {
            const std::int8_t* v = values.data() + static_cast<std::size_t>(bi) * 4;
            s += v[0] + v[1] + v[2] + v[3];
        }
        sums[static_cast<std::size_t>(r)] = s;
    }
    return sums;
}

BlockSparseMatrix to_block_sparse(std::span<const std::int8_t> dense, int rows, int cols,
                                  std::span<const std::uint8_t> mask) {
    if (rows < 0 || cols < 0) {
        throw ValidationError("to_block_sparse: negative matrix dimensions");
    }
    const std::int64_t n = static_cast<std::int64_t>(rows) * cols;
    if (std::ssize(dense) != n || std::ssize(mask) != n) {
        throw ValidationError("to_block_sparse: dense/mask length does not match rows*cols");
    }

    BlockSparseMatrix bsr;
    bsr.rows = rows;
    bsr.cols = cols;
    bsr.row_ptr.resize(static_cast<std::size_t>(rows) + 1, 0);
    const int block_cols_per_row = (cols + 3) / 4;
    for (int r = 0; r < rows; ++r) {
        for (int bc = 0; bc < block_cols_per_row; ++bc) {
            const int c0 = bc * 4;
            const int width = std::min(4, cols - c0);
            const std::size_t base = static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c0);
            const std::uint8_t first = mask[base] ? 1 : 0;
            for (int j = 1; j < width; ++j) {
                if ((mask[base + static_cast<std::size_t>(j)] ? 1 : 0) != first) {
                    throw ValidationError("to_block_sparse: mask splits 1x4 block at row " +
                                          std::to_string(r) + ", columns " + std::to_string(c0) +
                                          ".." + std::to_string(c0 + width - 1));
                }
            }
            if (!first) continue;
            bsr.block_cols.push_back(bc);
            std::int8_t padded[4] = {0, 0, 0, 0};
            for (int j = 0; j < width; ++j) padded[j] = dense[base + static_cast<std::size_t>(j)];
            bsr.values.insert(bsr.values.end(), padded, padded + 4);
        }
        bsr.row_ptr[static_cast<std::size_t>(r) + 1] = static_cast<std::int32_t>(bsr.block_cols.size());
    }
    return bsr;
}

}  // namespace prunekit
