#include "espace/bench.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>
#include <vector>

#include "espace/error.hpp"
#include "espace/kernels.hpp"
#include "espace/rng.hpp"

namespace espace::bench {

namespace {

using Clock = std::chrono::steady_clock;

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

template <typename T>
void fill_normal(std::vector<T>& buf, Rng& rng) {
    for (T& v : buf) v = static_cast<T>(rng.normal());
}

// The projected path stores P (K x L) and the folded weight (P^T W, here as
// its transpose F^T of size N x L); both are inference-time constants, so
// they are sampled directly rather than derived from an EVD.
template <typename T>
void run(const BenchConfig& cfg, BenchResult& res,
         void (*gemm)(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, int)) {
    std::vector<T> wt(cfg.n * cfg.k);   // W^T, N x K
    std::vector<T> x(cfg.k * cfg.m);    // X, K x M
    std::vector<T> pt(cfg.l * cfg.k);   // P^T, L x K
    std::vector<T> ft(cfg.n * cfg.l);   // (P^T W)^T, N x L
    std::vector<T> y(cfg.n * cfg.m);    // output, N x M
    std::vector<T> z(cfg.l * cfg.m);    // projected activations, L x M

    Rng rng(cfg.seed);
    std::vector<double> base_times, proj_times;
    base_times.reserve(cfg.reps);
    proj_times.reserve(cfg.reps);

    const int total = cfg.warmup + cfg.reps;
    for (int rep = 0; rep < total; ++rep) {
        fill_normal(wt, rng);
        fill_normal(x, rng);
        fill_normal(pt, rng);
        fill_normal(ft, rng);

        const auto t0 = Clock::now();
        gemm(wt.data(), x.data(), y.data(), cfg.n, cfg.k, cfg.m, cfg.threads);
        const auto t1 = Clock::now();
        gemm(pt.data(), x.data(), z.data(), cfg.l, cfg.k, cfg.m, cfg.threads);
        gemm(ft.data(), z.data(), y.data(), cfg.n, cfg.l, cfg.m, cfg.threads);
        const auto t2 = Clock::now();

        if (rep >= cfg.warmup) {
            base_times.push_back(std::chrono::duration<double>(t1 - t0).count());
            proj_times.push_back(std::chrono::duration<double>(t2 - t1).count());
        }
    }
    res.base_mean_s = mean(base_times);
    res.base_median_s = median(base_times);
    res.proj_mean_s = mean(proj_times);
    res.proj_median_s = median(proj_times);
}

}  // namespace

BenchResult bench_gemm(const BenchConfig& cfg) {
    if (cfg.k == 0 || cfg.n == 0 || cfg.m == 0 || cfg.l == 0)
        throw ShapeError("bench_gemm: dimensions must be positive");
    if (cfg.reps < 10) throw DataError("bench_gemm: reps must be >= 10");
    if (cfg.warmup < 0) throw DataError("bench_gemm: warmup must be >= 0");

    BenchResult res;
    res.k = cfg.k;
    res.n = cfg.n;
    res.m = cfg.m;
    res.l = cfg.l;
    res.reps = cfg.reps;
    res.flops_base = 2ull * cfg.k * cfg.n * cfg.m;
    res.flops_proj = 2ull * cfg.l * (cfg.k + cfg.n) * cfg.m;
    res.flop_ratio =
        static_cast<double>(cfg.l * (cfg.k + cfg.n)) / static_cast<double>(cfg.k * cfg.n);

    if (cfg.f32)
        run<float>(cfg, res, kernels::gemm_f32_threaded);
    else
        run<double>(cfg, res, kernels::gemm_f64_threaded);
    return res;
}

std::string describe(const BenchResult& r) {
    std::ostringstream out;
    out << "gemm shape K=" << r.k << " N=" << r.n << " M=" << r.m << " L=" << r.l
        << " reps=" << r.reps << "\n";
    out << "  baseline  W^T X            mean " << r.base_mean_s * 1e3 << " ms, median "
        << r.base_median_s * 1e3 << " ms, flops " << r.flops_base << "\n";
    out << "  projected (P^T W)^T(P^T X) mean " << r.proj_mean_s * 1e3 << " ms, median "
        << r.proj_median_s * 1e3 << " ms, flops " << r.flops_proj << "\n";
    out << "  flop_ratio " << r.flop_ratio << "\n";
    return out.str();
}

}  // namespace espace::bench
