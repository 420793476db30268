#include <cstring>

#include "espace/kernels.hpp"

// Reference kernels. SIMD variants must match these bitwise; any change to
// the accumulation order or expression shape here is an ABI-level change for
// every golden artifact.

namespace espace::kernels::scalar {

void gemm_f64(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n) {
    std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = ai[kk];
            const double* bk = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
}

void gemm_f32(const float* a, const float* b, float* c, std::size_t m,
              std::size_t k, std::size_t n) {
    std::memset(c, 0, m * n * sizeof(float));
    for (std::size_t i = 0; i < m; ++i) {
        const float* ai = a + i * k;
        float* ci = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const float aik = ai[kk];
            const float* bk = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
}

void rot2(double* x, double* y, std::size_t n, double c, double s) {
    for (std::size_t j = 0; j < n; ++j) {
        const double xj = x[j];
        const double yj = y[j];
        x[j] = c * xj - s * yj;
        y[j] = s * xj + c * yj;
    }
}

}  // namespace espace::kernels::scalar
