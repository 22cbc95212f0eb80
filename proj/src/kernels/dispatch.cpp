#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "kernels_detail.hpp"
#include "prunekit/kernels.hpp"

namespace prunekit::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(PRUNEKIT_HAVE_AVX2)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

void check_shapes(std::int64_t w_len, int rows, int cols, std::int64_t x_len, int batch,
                  std::int64_t out_len) {
    if (rows < 0 || cols < 0 || batch < 0) {
        throw ValidationError("kernel shapes must be non-negative");
    }
    if (cols > kMaxReductionCols) {
        throw ValidationError("reduction depth " + std::to_string(cols) +
                              " exceeds the int32 accumulator bound of " +
                              std::to_string(kMaxReductionCols) + " columns");
    }
    if (w_len >= 0 && w_len != static_cast<std::int64_t>(rows) * cols) {
        throw ValidationError("weight length does not match rows*cols");
    }
    if (x_len != static_cast<std::int64_t>(cols) * batch) {
        throw ValidationError("input length does not match cols*batch");
    }
    if (out_len != static_cast<std::int64_t>(rows) * batch) {
        throw ValidationError("output length does not match rows*batch");
    }
}

// Appends zero rows so every 1x4 block, including a tail block past the
// matrix edge, can read four full input rows.
std::vector<std::int8_t> pad_input_rows(std::span<const std::int8_t> x, int cols, int batch) {
    const int padded_cols = (cols + 3) / 4 * 4;
    std::vector<std::int8_t> padded(static_cast<std::size_t>(padded_cols) * batch, 0);
    std::memcpy(padded.data(), x.data(), x.size());
    return padded;
}

}  // namespace

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::kAuto: return "auto";
        case Backend::kScalar: return "scalar";
        case Backend::kAvx2: return "avx2";
    }
    return "unknown";
}

bool backend_available(Backend b) {
    switch (b) {
        case Backend::kAuto:
        case Backend::kScalar: return true;
        case Backend::kAvx2: return cpu_has_avx2();
    }
    return false;
}

Backend resolve_backend(Backend b) {
    if (b == Backend::kAuto) return cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar;
    if (!backend_available(b)) {
        throw ValidationError(std::string("backend '") + backend_name(b) +
                              "' is not available on this CPU");
    }
    return b;
}

void gemm_s8_s32(std::span<const std::int8_t> w, int rows, int cols,
                 std::span<const std::int8_t> x, int batch, std::span<std::int32_t> out,
                 Backend backend) {
    check_shapes(std::ssize(w), rows, cols, std::ssize(x), batch, std::ssize(out));
    const Backend resolved = resolve_backend(backend);
    if (rows == 0 || batch == 0) return;
    if (cols == 0) {
        std::fill(out.begin(), out.end(), 0);
        return;
    }
    switch (resolved) {
#if defined(PRUNEKIT_HAVE_AVX2)
        case Backend::kAvx2:
            detail::gemm_avx2(w.data(), rows, cols, x.data(), batch, out.data());
            return;
#endif
        default: detail::gemm_scalar(w.data(), rows, cols, x.data(), batch, out.data()); return;
    }
}

void bsr_spmm_s8_s32(const BlockSparseMatrix& w, std::span<const std::int8_t> x, int batch,
                     std::span<std::int32_t> out, Backend backend) {
    check_shapes(-1, w.rows, w.cols, std::ssize(x), batch, std::ssize(out));
    if (std::ssize(w.row_ptr) != w.rows + 1 ||
        std::ssize(w.values) != w.block_count() * 4) {
        throw ValidationError("block-sparse matrix structure is inconsistent");
    }
    const Backend resolved = resolve_backend(backend);
    if (w.rows == 0 || batch == 0) return;
    if (w.cols == 0 || w.block_count() == 0) {
        std::fill(out.begin(), out.end(), 0);
        return;
    }
    const std::vector<std::int8_t> padded = pad_input_rows(x, w.cols, batch);
    switch (resolved) {
#if defined(PRUNEKIT_HAVE_AVX2)
        case Backend::kAvx2: detail::spmm_avx2(w, padded.data(), batch, out.data()); return;
#endif
        default: detail::spmm_scalar(w, padded.data(), batch, out.data()); return;
    }
}

std::uint64_t gemm_mac_count(int rows, int cols, int batch) {
    return static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols) *
           static_cast<std::uint64_t>(batch);
}

std::uint64_t bsr_mac_count(const BlockSparseMatrix& w, int batch) {
    return 4ull * static_cast<std::uint64_t>(w.block_count()) * static_cast<std::uint64_t>(batch);
}

}  // namespace prunekit::kernels
