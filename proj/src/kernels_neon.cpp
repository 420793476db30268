// NEON variants for aarch64. Same contract as the scalar reference:
// vectorize across output columns only, separate mul/add, bitwise-identical
// results.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cstring>

#include "espace/kernels.hpp"

namespace espace::kernels::neon {

void gemm_f64(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n) {
    std::memset(c, 0, m * n * sizeof(double));
    const std::size_t n2 = n - n % 2;
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = ai[kk];
            const double* bk = b + kk * n;
            const float64x2_t va = vdupq_n_f64(aik);
            std::size_t j = 0;
            for (; j < n2; j += 2) {
                float64x2_t vc = vld1q_f64(ci + j);
                float64x2_t vb = vld1q_f64(bk + j);
                vc = vaddq_f64(vc, vmulq_f64(va, vb));
                vst1q_f64(ci + j, vc);
            }
            for (; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
}

void gemm_f32(const float* a, const float* b, float* c, std::size_t m,
              std::size_t k, std::size_t n) {
    std::memset(c, 0, m * n * sizeof(float));
    const std::size_t n4 = n - n % 4;
    for (std::size_t i = 0; i < m; ++i) {
        const float* ai = a + i * k;
        float* ci = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const float aik = ai[kk];
            const float* bk = b + kk * n;
            const float32x4_t va = vdupq_n_f32(aik);
            std::size_t j = 0;
            for (; j < n4; j += 4) {
                float32x4_t vc = vld1q_f32(ci + j);
                float32x4_t vb = vld1q_f32(bk + j);
                vc = vaddq_f32(vc, vmulq_f32(va, vb));
                vst1q_f32(ci + j, vc);
            }
            for (; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
}

void rot2(double* x, double* y, std::size_t n, double c, double s) {
    const float64x2_t vc = vdupq_n_f64(c);
    const float64x2_t vs = vdupq_n_f64(s);
    const std::size_t n2 = n - n % 2;
    std::size_t j = 0;
    for (; j < n2; j += 2) {
        float64x2_t vx = vld1q_f64(x + j);
        float64x2_t vy = vld1q_f64(y + j);
        float64x2_t nx = vsubq_f64(vmulq_f64(vc, vx), vmulq_f64(vs, vy));
        float64x2_t ny = vaddq_f64(vmulq_f64(vs, vx), vmulq_f64(vc, vy));
        vst1q_f64(x + j, nx);
        vst1q_f64(y + j, ny);
    }
    for (; j < n; ++j) {
        const double xj = x[j];
        const double yj = y[j];
        x[j] = c * xj - s * yj;
        y[j] = s * xj + c * yj;
    }
}

}  // namespace espace::kernels::neon

#endif  // aarch64
