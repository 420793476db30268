// AVX2 variants. Compiled with -mavx2 (see src/CMakeLists.txt); only entered
// after a runtime cpuid check. Vectorization is across output columns, with
// explicit mul/add intrinsics, so each element sees the same rounding
// sequence as the scalar reference.

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <cstring>

#include "espace/kernels.hpp"

namespace espace::kernels::avx2 {

void gemm_f64(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n) {
    std::memset(c, 0, m * n * sizeof(double));
    const std::size_t n4 = n - n % 4;
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = ai[kk];
            const double* bk = b + kk * n;
            const __m256d va = _mm256_set1_pd(aik);
            std::size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d vc = _mm256_loadu_pd(ci + j);
                __m256d vb = _mm256_loadu_pd(bk + j);
                vc = _mm256_add_pd(vc, _mm256_mul_pd(va, vb));
                _mm256_storeu_pd(ci + j, vc);
            }
            for (; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
}

void gemm_f32(const float* a, const float* b, float* c, std::size_t m,
              std::size_t k, std::size_t n) {
    std::memset(c, 0, m * n * sizeof(float));
    const std::size_t n8 = n - n % 8;
    for (std::size_t i = 0; i < m; ++i) {
        const float* ai = a + i * k;
        float* ci = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const float aik = ai[kk];
            const float* bk = b + kk * n;
            const __m256 va = _mm256_set1_ps(aik);
            std::size_t j = 0;
            for (; j < n8; j += 8) {
                __m256 vc = _mm256_loadu_ps(ci + j);
                __m256 vb = _mm256_loadu_ps(bk + j);
                vc = _mm256_add_ps(vc, _mm256_mul_ps(va, vb));
                _mm256_storeu_ps(ci + j, vc);
            }
            for (; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
}

void rot2(double* x, double* y, std::size_t n, double c, double s) {
    const __m256d vc = _mm256_set1_pd(c);
    const __m256d vs = _mm256_set1_pd(s);
    const std::size_t n4 = n - n % 4;
    std::size_t j = 0;
    for (; j < n4; j += 4) {
        __m256d vx = _mm256_loadu_pd(x + j);
        __m256d vy = _mm256_loadu_pd(y + j);
        __m256d nx = _mm256_sub_pd(_mm256_mul_pd(vc, vx), _mm256_mul_pd(vs, vy));
        __m256d ny = _mm256_add_pd(_mm256_mul_pd(vs, vx), _mm256_mul_pd(vc, vy));
        _mm256_storeu_pd(x + j, nx);
        _mm256_storeu_pd(y + j, ny);
    }
    for (; j < n; ++j) {
        const double xj = x[j];
        const double yj = y[j];
        x[j] = c * xj - s * yj;
        y[j] = s * xj + c * yj;
    }
}

}  // namespace espace::kernels::avx2

#endif  // x86
