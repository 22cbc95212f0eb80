#pragma once

#include <cstdint>

#include "prunekit/block_sparse.hpp"

// Backend-specific inner loops. Contracts match the public entry points in
// kernels.hpp except that x for the spmm variants is already padded to
// padded_cols = 4 * ceil(cols / 4) rows (zero rows appended), so tail blocks
// can read all four lanes unconditionally.
namespace prunekit::kernels::detail {

void gemm_scalar(const std::int8_t* w, int rows, int cols, const std::int8_t* x, int batch,
                 std::int32_t* out);
void spmm_scalar(const BlockSparseMatrix& w, const std::int8_t* x_padded, int batch,
                 std::int32_t* out);

#if defined(PRUNEKIT_HAVE_AVX2)
void gemm_avx2(const std::int8_t* w, int rows, int cols, const std::int8_t* x, int batch,
               std::int32_t* out);
void spmm_avx2(const BlockSparseMatrix& w, const std::int8_t* x_padded, int batch,
               std::int32_t* out);
#endif

}  // namespace prunekit::kernels::detail
