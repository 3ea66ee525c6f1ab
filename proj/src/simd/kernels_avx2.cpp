// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "hsi/simd/kernels.hpp"

namespace hsi::simd {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    if (i + 4 <= n) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        i += 4;
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] += dot_avx2(a + r * cols, x, cols);
}

void gemv_t_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(x[r], a + r * cols, y, cols);
}

void ger_avx2(double* a, std::size_t rows, std::size_t cols, const double* x, const double* y) {
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(x[r], y, a + r * cols, cols);
}

// 4 x 8 register tile: two vectors of B per k, four broadcast rows of A.
void gemm_tile_4x8(std::size_t k, const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
                   std::size_t ldc) {
    __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
    __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
    __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
    __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
        const __m256d b0 = _mm256_loadu_pd(b + p * ldb);
        const __m256d b1 = _mm256_loadu_pd(b + p * ldb + 4);
        __m256d av = _mm256_broadcast_sd(a + p);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_broadcast_sd(a + lda + p);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_broadcast_sd(a + 2 * lda + p);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_broadcast_sd(a + 3 * lda + p);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
    }
    auto store = [](double* dst, __m256d v) { _mm256_storeu_pd(dst, _mm256_add_pd(_mm256_loadu_pd(dst), v)); };
    store(c, c00);
    store(c + 4, c01);
    store(c + ldc, c10);
    store(c + ldc + 4, c11);
    store(c + 2 * ldc, c20);
    store(c + 2 * ldc + 4, c21);
    store(c + 3 * ldc, c30);
    store(c + 3 * ldc + 4, c31);
}

// One row of A against four columns of B.
void gemm_tile_1x4(std::size_t k, const double* a, const double* b, std::size_t ldb, double* c) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p)
        acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p), _mm256_loadu_pd(b + p * ldb), acc);
    _mm256_storeu_pd(c, _mm256_add_pd(_mm256_loadu_pd(c), acc));
}

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
               std::size_t ldb, double* c, std::size_t ldc) {
    const std::size_t n8 = n - n % 8;
    const std::size_t n4 = n - n % 4;
    const std::size_t m4 = m - m % 4;
    for (std::size_t i = 0; i < m4; i += 4)
        for (std::size_t j = 0; j < n8; j += 8) gemm_tile_4x8(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j0 = i < m4 ? n8 : 0;
        for (std::size_t j = j0; j < n4; j += 4) gemm_tile_1x4(k, a + i * lda, b + j, ldb, c + i * ldc + j);
        for (std::size_t j = std::max(j0, n4); j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * lda + p] * b[p * ldb + j];
            c[i * ldc + j] += acc;
        }
    }
}

// exp(x) for x in [-708, 709]: x = n ln2 + r with |r| <= ln2 / 2 (two-part
// ln2), exp(r) by its degree-13 Taylor polynomial, then scaled by 2^n.
inline void reduce_exp_arg(__m256d x, __m256d& r, __m256d& n) {
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
    // operand order keeps NaN inputs NaN
    x = _mm256_max_pd(_mm256_set1_pd(-708.0), _mm256_min_pd(_mm256_set1_pd(709.0), x));
    n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    r = _mm256_fnmadd_pd(n, ln2_hi, x);
    r = _mm256_fnmadd_pd(n, ln2_lo, r);
}

// sum_{k=1..13} r^k / k!
inline __m256d expm1_poly(__m256d r) {
    static constexpr double c[13] = {1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
                                     1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,      1.0 / 720.0,
                                     1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,         0.5,
                                     1.0};
    __m256d p = _mm256_set1_pd(c[0]);
    for (int i = 1; i < 13; ++i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(c[i]));
    return _mm256_mul_pd(p, r);
}

inline __m256d pow2n(__m256d n) {
    const __m128i ni = _mm256_cvtpd_epi32(n);
    __m256i bits = _mm256_cvtepi32_epi64(ni);
    bits = _mm256_slli_epi64(_mm256_add_epi64(bits, _mm256_set1_epi64x(1023)), 52);
    return _mm256_castsi256_pd(bits);
}

inline __m256d exp_avx2(__m256d x) {
    __m256d r, n;
    reduce_exp_arg(x, r, n);
    const __m256d er = _mm256_add_pd(_mm256_set1_pd(1.0), expm1_poly(r));
    return _mm256_mul_pd(er, pow2n(n));
}

void sigmoid_avx2(double* v, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(v + i);
        const __m256d e = exp_avx2(_mm256_sub_pd(zero, x));
        _mm256_storeu_pd(v + i, _mm256_div_pd(one, _mm256_add_pd(one, e)));
    }
    for (; i < n; ++i) v[i] = 1.0 / (1.0 + std::exp(-v[i]));
}

// tanh|x| = em1 / (em1 + 2) with em1 = expm1(2|x|); the polynomial gives
// expm1 directly below 0.34, exp - 1 is used above it.
void tanh_avx2(double* v, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d two = _mm256_set1_pd(2.0);
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    const __m256d small = _mm256_set1_pd(0.34);
    const __m256d big = _mm256_set1_pd(40.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(v + i);
        const __m256d sign = _mm256_and_pd(x, sign_mask);
        const __m256d y = _mm256_min_pd(big, _mm256_mul_pd(two, _mm256_andnot_pd(sign_mask, x)));
        const __m256d em1_small = expm1_poly(y);
        const __m256d em1_large = _mm256_sub_pd(exp_avx2(y), one);
        const __m256d em1 = _mm256_blendv_pd(em1_large, em1_small, _mm256_cmp_pd(y, small, _CMP_LT_OQ));
        const __m256d t = _mm256_div_pd(em1, _mm256_add_pd(em1, two));
        _mm256_storeu_pd(v + i, _mm256_or_pd(t, sign));
    }
    for (; i < n; ++i) v[i] = std::tanh(v[i]);
}

}  // namespace

const KernelTable& avx2_kernel_table() noexcept {
    static const KernelTable table{Backend::avx2, dot_avx2,    axpy_avx2,
                                   gemv_avx2,     gemv_t_avx2, ger_avx2,
                                   gemm_avx2,     sigmoid_avx2, tanh_avx2};
    return table;
}

}  // namespace hsi::simd
