#pragma once

#include <cstdint>
#include <span>

#include "prunekit/block_sparse.hpp"
#include "prunekit/common.hpp"

namespace prunekit::kernels {

// Runtime-selected backend. kAuto picks the widest instruction set the CPU
// supports; every backend computes bit-identical int32 results (pure integer
// arithmetic, no reassociation hazards), which the tests assert.
enum class Backend { kAuto, kScalar, kAvx2 };

const char* backend_name(Backend b);
bool backend_available(Backend b);
Backend resolve_backend(Backend b);  // kAuto -> concrete; throws ValidationError if unavailable

// int8 x int8 -> int32 with the reduction depth capped so the accumulator
// cannot overflow: 127 * 128 * 2^16 < 2^31.
inline constexpr std::int64_t kMaxReductionCols = std::int64_t{1} << 16;

// Dense GEMM: w is (rows x cols) row-major int8, x is (cols x batch)
// row-major int8, out is (rows x batch) int32. Empty dimensions yield a
// zeroed output.
void gemm_s8_s32(std::span<const std::int8_t> w, int rows, int cols,
                 std::span<const std::int8_t> x, int batch, std::span<std::int32_t> out,
                 Backend backend = Backend::kAuto);

// Block-sparse GEMM over 1x4 blocks; same x/out layout as gemm_s8_s32. All
// four lanes of every stored block are multiplied (padding lanes carry zero
// weights), so the executed multiply count is exactly bsr_mac_count.
void bsr_spmm_s8_s32(const BlockSparseMatrix& w, std::span<const std::int8_t> x, int batch,
                     std::span<std::int32_t> out, Backend backend = Backend::kAuto);

std::uint64_t gemm_mac_count(int rows, int cols, int batch);
std::uint64_t bsr_mac_count(const BlockSparseMatrix& w, int batch);

}  // namespace prunekit::kernels
