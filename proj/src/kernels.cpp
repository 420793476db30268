#include "espace/kernels.hpp"

#include <algorithm>
#include <thread>

#include "espace/error.hpp"

namespace espace::kernels {

const char* isa_name(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
        case Isa::Neon: return "neon";
    }
    return "?";
}

namespace {

const KernelTable kScalarTable{Isa::Scalar, scalar::gemm_f64, scalar::gemm_f32,
                               scalar::rot2};

#if defined(__x86_64__) || defined(__i386__)
const KernelTable kAvx2Table{Isa::Avx2, avx2::gemm_f64, avx2::gemm_f32, avx2::rot2};

bool cpu_has_avx2() { return __builtin_cpu_supports("avx2") != 0; }
#endif

#if defined(__aarch64__)
const KernelTable kNeonTable{Isa::Neon, neon::gemm_f64, neon::gemm_f32, neon::rot2};
#endif

Isa detect_best() {
#if defined(__x86_64__) || defined(__i386__)
    if (cpu_has_avx2()) return Isa::Avx2;
#endif
#if defined(__aarch64__)
    return Isa::Neon;
#endif
    return Isa::Scalar;
}

const KernelTable* g_active = nullptr;

}  // namespace

std::vector<Isa> available() {
    std::vector<Isa> out{Isa::Scalar};
#if defined(__x86_64__) || defined(__i386__)
    if (cpu_has_avx2()) out.push_back(Isa::Avx2);
#endif
#if defined(__aarch64__)
    out.push_back(Isa::Neon);
#endif
    return out;
}

const KernelTable& table(Isa isa) {
    switch (isa) {
        case Isa::Scalar:
            return kScalarTable;
        case Isa::Avx2:
#if defined(__x86_64__) || defined(__i386__)
            if (cpu_has_avx2()) return kAvx2Table;
#endif
            break;
        case Isa::Neon:
#if defined(__aarch64__)
            return kNeonTable;
#else
            break;
#endif
    }
    throw DataError(std::string("kernel variant unavailable on this machine: ") +
                    isa_name(isa));
}

const KernelTable& active() {
    if (g_active == nullptr) g_active = &table(detect_best());
    return *g_active;
}

void select(Isa isa) { g_active = &table(isa); }

void select_best() { g_active = &table(detect_best()); }

void gemm_f64_threaded(const double* a, const double* b, double* c, std::size_t m,
                       std::size_t k, std::size_t n, int threads) {
    const KernelTable& kt = active();
    if (threads <= 1 || m < 2) {
        kt.gemm_f64(a, b, c, m, k, n);
        return;
    }
    const std::size_t t = std::min<std::size_t>(threads, m);
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (std::size_t ti = 0; ti < t; ++ti) {
        const std::size_t i0 = m * ti / t;
        const std::size_t i1 = m * (ti + 1) / t;
        pool.emplace_back([&, i0, i1] {
            kt.gemm_f64(a + i0 * k, b, c + i0 * n, i1 - i0, k, n);
        });
    }
    for (auto& th : pool) th.join();
}

void gemm_f32_threaded(const float* a, const float* b, float* c, std::size_t m,
                       std::size_t k, std::size_t n, int threads) {
    const KernelTable& kt = active();
    if (threads <= 1 || m < 2) {
        kt.gemm_f32(a, b, c, m, k, n);
        return;
    }
    const std::size_t t = std::min<std::size_t>(threads, m);
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (std::size_t ti = 0; ti < t; ++ti) {
        const std::size_t i0 = m * ti / t;
        const std::size_t i1 = m * (ti + 1) / t;
        pool.emplace_back([&, i0, i1] {
            kt.gemm_f32(a + i0 * k, b, c + i0 * n, i1 - i0, k, n);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace espace::kernels
