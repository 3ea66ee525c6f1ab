#include <cmath>

#include "hsi/simd/kernels.hpp"

namespace hsi::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] += dot_scalar(a + r * cols, x, cols);
}

void gemv_t_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) axpy_scalar(x[r], a + r * cols, y, cols);
}

void ger_scalar(double* a, std::size_t rows, std::size_t cols, const double* x, const double* y) {
    for (std::size_t r = 0; r < rows; ++r) axpy_scalar(x[r], y, a + r * cols, cols);
}

// Each C element accumulates its k-sum in a local, then adds it to C.
void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
                 std::size_t ldb, double* c, std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * lda + p] * b[p * ldb + j];
            c[i * ldc + j] += acc;
        }
}

void sigmoid_scalar(double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 / (1.0 + std::exp(-v[i]));
}

void tanh_scalar(double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) v[i] = std::tanh(v[i]);
}

}  // namespace

const KernelTable& scalar_kernels() noexcept {
    static const KernelTable table{Backend::scalar, dot_scalar,    axpy_scalar,
                                   gemv_scalar,     gemv_t_scalar, ger_scalar,
                                   gemm_scalar,     sigmoid_scalar, tanh_scalar};
    return table;
}

}  // namespace hsi::simd
