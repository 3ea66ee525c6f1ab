#pragma once

// Dense double-precision kernels used by the network layers.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The variant is picked once at startup from the CPU
// feature flags; HSI_SIMD=scalar in the environment forces the reference
// path. Results of the two paths agree to rounding, not bit-for-bit: the
// vector path sums in four lanes. Within one backend the summation order is
// fixed, so repeated runs are bit-identical. The vector sigmoid and tanh use
// their own exp polynomial and match the libm versions to a few ulp.

#include <cstddef>
#include <span>
#include <string_view>

namespace hsi::simd {

enum class Backend { scalar, avx2 };

std::string_view backend_name(Backend backend) noexcept;

/// True when the backend was compiled in and the CPU supports it.
bool backend_supported(Backend backend) noexcept;

Backend active_backend() noexcept;

/// Throws hsi::ConfigError if the backend is unsupported.
void set_backend(Backend backend);

/// Returns sum_i a[i] * b[i].
double dot(std::span<const double> a, std::span<const double> b);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// y[r] += sum_c A[r, c] * x[c], with A row-major rows x cols.
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);

/// y[c] += sum_r x[r] * A[r, c]
void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y);

/// A[r, c] += x[r] * y[c]
void ger(std::span<double> a, std::size_t rows, std::size_t cols,
         std::span<const double> x, std::span<const double> y);

/// C[i, j] += sum_k A[i, k] * B[k, j] for an m x n block of C, all operands
/// row-major with leading dimensions lda, ldb, ldc.
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double* c, std::size_t ldc);

/// v[i] = 1 / (1 + exp(-v[i]))
void sigmoid_inplace(std::span<double> v);

/// v[i] = tanh(v[i])
void tanh_inplace(std::span<double> v);

/// Kernel table for one backend; exposed so tests can compare backends
/// directly without touching the global selection.
struct KernelTable {
    Backend backend;
    double (*dot)(const double* a, const double* b, std::size_t n);
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
    void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
    void (*ger)(double* a, std::size_t rows, std::size_t cols, const double* x, const double* y);
    void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
                 std::size_t ldb, double* c, std::size_t ldc);
    void (*sigmoid)(double* v, std::size_t n);
    void (*tanh)(double* v, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;

/// nullptr when AVX2 is not compiled in or not supported by this CPU.
const KernelTable* avx2_kernels() noexcept;

}  // namespace hsi::simd
