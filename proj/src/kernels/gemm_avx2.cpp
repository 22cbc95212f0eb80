#if defined(PRUNEKIT_HAVE_AVX2)

#include <immintrin.h>

#include <cstring>

#include "kernels_detail.hpp"

namespace prunekit::kernels::detail {
namespace {

// Sign-extend 8 int8 batch entries to a lane of 8 int32.
inline __m256i load_s8x8(const std::int8_t* p) {
    return _mm256_cvtepi8_epi32(_mm_loadl_epi64(reinterpret_cast<const __m128i*>(p)));
}

}  // namespace

void gemm_avx2(const std::int8_t* w, int rows, int cols, const std::int8_t* x, int batch,
               std::int32_t* out) {
    const int vec = batch & ~7;
    for (int r = 0; r < rows; ++r) {
        std::int32_t* orow = out + static_cast<std::size_t>(r) * batch;
        std::memset(orow, 0, static_cast<std::size_t>(batch) * sizeof(std::int32_t));
        const std::int8_t* wrow = w + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) {
            const std::int32_t wv = wrow[c];
            const std::int8_t* xrow = x + static_cast<std::size_t>(c) * batch;
            const __m256i wvec = _mm256_set1_epi32(wv);
            for (int b = 0; b < vec; b += 8) {
                __m256i acc = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(orow + b));
                acc = _mm256_add_epi32(acc, _mm256_mullo_epi32(wvec, load_s8x8(xrow + b)));
                _mm256_storeu_si256(reinterpret_cast<__m256i*>(orow + b), acc);
            }
            for (int b = vec; b < batch; ++b) orow[b] += wv * xrow[b];
        }
    }
}

void spmm_avx2(const BlockSparseMatrix& w, const std::int8_t* x_padded, int batch,
               std::int32_t* out) {
    const int vec = batch & ~7;
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
                const __m256i wvec = _mm256_set1_epi32(wv);
                for (int b = 0; b < vec; b += 8) {
                    __m256i acc = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(orow + b));
                    acc = _mm256_add_epi32(acc, _mm256_mullo_epi32(wvec, load_s8x8(xrow + b)));
                    _mm256_storeu_si256(reinterpret_cast<__m256i*>(orow + b), acc);
                }
                for (int b = vec; b < batch; ++b) orow[b] += wv * xrow[b];
            }
        }
    }
}

}  // namespace prunekit::kernels::detail

#endif  // PRUNEKIT_HAVE_AVX2
