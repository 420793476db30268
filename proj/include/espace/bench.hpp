#pragma once

#include <cstdint>
#include <string>

namespace espace::bench {

// GEMM latency comparison: baseline W^T X versus the two-GEMM projected
// pipeline (P^T W)^T (P^T X). Fresh random matrices every rep; matrix
// generation and allocation stay outside the timed region. Wall times are
// reported, never asserted.
struct BenchConfig {
    std::size_t k = 0;
    std::size_t n = 0;
    std::size_t m = 0;
    std::size_t l = 0;
    int reps = 1000;    // >= 10
    int warmup = 50;    // excluded from statistics
    bool f32 = false;   // 32-bit mode exists only here
    int threads = 1;    // row-parallel matmul for curiosity runs
    std::uint64_t seed = 1;
};

struct BenchResult {
    std::size_t k = 0, n = 0, m = 0, l = 0;
    int reps = 0;
    double base_mean_s = 0.0;
    double base_median_s = 0.0;
    double proj_mean_s = 0.0;
    double proj_median_s = 0.0;
    std::uint64_t flops_base = 0;  // 2*K*N*M
    std::uint64_t flops_proj = 0;  // 2*L*(K+N)*M
    double flop_ratio = 0.0;       // L*(K+N) / (K*N), exactly
};

BenchResult bench_gemm(const BenchConfig& config);

// Human-readable summary (timing lines plus flop accounting).
std::string describe(const BenchResult& r);

}  // namespace espace::bench
