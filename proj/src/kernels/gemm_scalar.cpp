#include <cstring>

#include "kernels_detail.hpp"

namespace prunekit::kernels::detail {

void gemm_scalar(const std::int8_t* w, int rows, int cols, const std::int8_t* x, int batch,
                 std::int32_t* out) {
    for (int r = 0; r < rows; ++r) {
        std::int32_t* orow = out + static_cast<std::size_t>(r) * batch;
        std::memset(orow, 0, static_cast<std::size_t>(batch) * sizeof(std::int32_t));
        const std::int8_t* wrow = w + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) {
            const std::int32_t wv = wrow[c];
            const std::int8_t* xrow = x + static_cast<std::size_t>(c) * batch;
            for (int b = 0; b < batch; ++b) orow[b] += wv * xrow[b];
        }
    }
}

void spmm_scalar(const BlockSparseMatrix& w, const std::int8_t* x_padded, int batch,
                 std::int32_t* out) {
    for (int r = 0; r < w.rows; ++r) {
        std::int32_t* orow = out + static_cast<std::size_t>(r) * batch;
        std::memset(orow, 0, static_cast<std::size_t>(batch) * sizeof(std::int32_t));
        for (std::int32_t bi = w.row_ptr[static_cast<std::size_t>(r)];
             bi < w.row_ptr[static_cast<std::size_t>(r) + 1]; ++bi) {
            const std::int64_t c0 = static_cast<std::int64_t>(w.block_cols[static_cast<std::size_t>(bi)]) * 4;
            const std::int8_t* v = w.values.data() + static_cast<std::size_t>(bi) * 4;
            for (int j = 0; j < 4; ++j) {
                const std::int32_t wv = v[j];
                const std::int8_t* xrow = x_padded + static_cast<std::size_t>(c0 + j) * batch;
                for (int b = 0; b < batch; ++b) orow[b] += wv * xrow[b];
            }
        }
    }
}

}  // namespace prunekit::kernels::detail
