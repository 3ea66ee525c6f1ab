#include <atomic>
#include <cassert>
#include <cstdlib>
#include <string>

#include "hsi/error.hpp"
#include "hsi/simd/kernels.hpp"

namespace hsi::simd {

#if defined(HSI_HAVE_AVX2)
const KernelTable& avx2_kernel_table() noexcept;
#endif

const KernelTable* avx2_kernels() noexcept {
#if defined(HSI_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &avx2_kernel_table() : nullptr;
#else
    return nullptr;
#endif
}

namespace {

const KernelTable* initial_table() noexcept {
    const char* forced = std::getenv("HSI_SIMD");
    if (forced != nullptr && std::string(forced) == "scalar") return &scalar_kernels();
    if (const KernelTable* avx = avx2_kernels()) return avx;
    return &scalar_kernels();
}

std::atomic<const KernelTable*>& active_table() noexcept {
    static std::atomic<const KernelTable*> table{initial_table()};
    return table;
}

inline const KernelTable& kernels() noexcept {
    return *active_table().load(std::memory_order_relaxed);
}

}  // namespace

std::string_view backend_name(Backend backend) noexcept {
    switch (backend) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
    }
    return "unknown";
}

bool backend_supported(Backend backend) noexcept {
    return backend == Backend::scalar || avx2_kernels() != nullptr;
}

Backend active_backend() noexcept { return kernels().backend; }

void set_backend(Backend backend) {
    if (backend == Backend::scalar) {
        active_table().store(&scalar_kernels());
        return;
    }
    const KernelTable* avx = avx2_kernels();
    if (avx == nullptr) throw ConfigError("simd backend avx2 is not available on this machine");
    active_table().store(avx);
}

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    return kernels().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    kernels().axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
    assert(a.size() == rows * cols && x.size() == cols && y.size() == rows);
    kernels().gemv(a.data(), rows, cols, x.data(), y.data());
}

void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y) {
    assert(a.size() == rows * cols && x.size() == rows && y.size() == cols);
    kernels().gemv_t(a.data(), rows, cols, x.data(), y.data());
}

void ger(std::span<double> a, std::size_t rows, std::size_t cols,
         std::span<const double> x, std::span<const double> y) {
    assert(a.size() == rows * cols && x.size() == rows && y.size() == cols);
    kernels().ger(a.data(), rows, cols, x.data(), y.data());
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double* c, std::size_t ldc) {
    assert(lda >= k && ldb >= n && ldc >= n);
    kernels().gemm(m, n, k, a, lda, b, ldb, c, ldc);
}

void sigmoid_inplace(std::span<double> v) { kernels().sigmoid(v.data(), v.size()); }

void tanh_inplace(std::span<double> v) { kernels().tanh(v.data(), v.size()); }

}  // namespace hsi::simd
