#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace espace::kernels {

// Data-parallel inner loops used by the matrix layer. Each kernel has a
// scalar reference and SIMD variants selected at runtime. Variants vectorize
// across independent output elements only, never across the reduction
// dimension, and use separate mul/add (no fma), so every variant produces
// bitwise-identical results. tests/test_kernels.cpp asserts this.
enum class Isa {
    Scalar,
    Avx2,
    Neon,
};

const char* isa_name(Isa isa);

// c (m x n) = a (m x k) . b (k x n), all row-major contiguous. The kernel
// zeroes c and accumulates in ascending-k order for every output element.
using GemmF64Fn = void (*)(const double* a, const double* b, double* c,
                           std::size_t m, std::size_t k, std::size_t n);
using GemmF32Fn = void (*)(const float* a, const float* b, float* c,
                           std::size_t m, std::size_t k, std::size_t n);

// Plane rotation of two contiguous rows: x' = c*x - s*y, y' = s*x + c*y.
using Rot2Fn = void (*)(double* x, double* y, std::size_t n, double c, double s);

struct KernelTable {
    Isa isa;
    GemmF64Fn gemm_f64;
    GemmF32Fn gemm_f32;
    Rot2Fn rot2;
};

// Variants compiled into this binary and runnable on this machine.
std::vector<Isa> available();

// Table for an explicit variant; throws DataError if unavailable.
const KernelTable& table(Isa isa);

// Currently selected table. Defaults to the best available variant.
const KernelTable& active();

// Force a variant (tests, benchmarks). Throws DataError if unavailable.
void select(Isa isa);

// Reset to auto-detection.
void select_best();

// Row-partitioned multithreaded f64 gemm on top of the active kernel. Each
// output element is still computed by exactly one thread in the same order,
// so results are bitwise-identical for any thread count.
void gemm_f64_threaded(const double* a, const double* b, double* c,
                       std::size_t m, std::size_t k, std::size_t n, int threads);
void gemm_f32_threaded(const float* a, const float* b, float* c,
                       std::size_t m, std::size_t k, std::size_t n, int threads);

namespace scalar {
void gemm_f64(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n);
void gemm_f32(const float* a, const float* b, float* c, std::size_t m,
              std::size_t k, std::size_t n);
void rot2(double* x, double* y, std::size_t n, double c, double s);
}  // namespace scalar

#if defined(__x86_64__) || defined(__i386__)
namespace avx2 {
void gemm_f64(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n);
void gemm_f32(const float* a, const float* b, float* c, std::size_t m,
              std::size_t k, std::size_t n);
void rot2(double* x, double* y, std::size_t n, double c, double s);
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
void gemm_f64(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n);
void gemm_f32(const float* a, const float* b, float* c, std::size_t m,
              std::size_t k, std::size_t n);
void rot2(double* x, double* y, std::size_t n, double c, double s);
}  // namespace neon
#endif

}  // namespace espace::kernels
