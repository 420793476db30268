#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <vector>

#include "espace/kernels.hpp"
#include "espace/rng.hpp"

using namespace espace;
using kernels::Isa;

namespace {

template <typename T>
std::vector<T> random_buf(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<T> v(n);
    for (T& x : v) x = static_cast<T>(rng.normal());
    return v;
}

template <typename T>
bool bytes_equal(const std::vector<T>& a, const std::vector<T>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

}  // namespace

TEST_CASE("scalar variant is always available") {
    const auto isas = kernels::available();
    REQUIRE(!isas.empty());
    CHECK(isas.front() == Isa::Scalar);
}

TEST_CASE("gemm f64 variants are bitwise-identical to the scalar reference") {
    // Odd sizes exercise the vector tails.
    const std::size_t shapes[][3] = {{1, 1, 1}, {3, 5, 7}, {8, 8, 8},
                                     {13, 9, 17}, {32, 31, 30}, {5, 64, 33}};
    for (const auto& s : shapes) {
        const auto a = random_buf<double>(s[0] * s[1], 11 + s[0]);
        const auto b = random_buf<double>(s[1] * s[2], 23 + s[2]);
        std::vector<double> ref(s[0] * s[2]);
        kernels::scalar::gemm_f64(a.data(), b.data(), ref.data(), s[0], s[1], s[2]);
        for (Isa isa : kernels::available()) {
            std::vector<double> out(s[0] * s[2], -1.0);
            kernels::table(isa).gemm_f64(a.data(), b.data(), out.data(), s[0], s[1], s[2]);
            INFO("isa=", kernels::isa_name(isa), " shape=", s[0], "x", s[1], "x", s[2]);
            CHECK(bytes_equal(ref, out));
        }
    }
}

TEST_CASE("gemm f32 variants are bitwise-identical to the scalar reference") {
    const std::size_t shapes[][3] = {{2, 3, 4}, {9, 16, 11}, {17, 8, 25}};
    for (const auto& s : shapes) {
        const auto a = random_buf<float>(s[0] * s[1], 5 + s[1]);
        const auto b = random_buf<float>(s[1] * s[2], 7 + s[2]);
        std::vector<float> ref(s[0] * s[2]);
        kernels::scalar::gemm_f32(a.data(), b.data(), ref.data(), s[0], s[1], s[2]);
        for (Isa isa : kernels::available()) {
            std::vector<float> out(s[0] * s[2], -1.0f);
            kernels::table(isa).gemm_f32(a.data(), b.data(), out.data(), s[0], s[1], s[2]);
            INFO("isa=", kernels::isa_name(isa));
            CHECK(bytes_equal(ref, out));
        }
    }
}

TEST_CASE("rot2 variants are bitwise-identical to the scalar reference") {
    for (std::size_t n : {1u, 2u, 5u, 16u, 33u, 100u}) {
        const auto x0 = random_buf<double>(n, 101 + n);
        const auto y0 = random_buf<double>(n, 202 + n);
        const double c = 0.8, s = 0.6;
        auto xr = x0, yr = y0;
        kernels::scalar::rot2(xr.data(), yr.data(), n, c, s);
        for (Isa isa : kernels::available()) {
            auto x = x0, y = y0;
            kernels::table(isa).rot2(x.data(), y.data(), n, c, s);
            INFO("isa=", kernels::isa_name(isa), " n=", n);
            CHECK(bytes_equal(xr, x));
            CHECK(bytes_equal(yr, y));
        }
    }
}

TEST_CASE("threaded gemm matches single-thread bitwise for any thread count") {
    const std::size_t m = 37, k = 19, n = 23;
    const auto a = random_buf<double>(m * k, 3);
    const auto b = random_buf<double>(k * n, 4);
    std::vector<double> ref(m * n);
    kernels::gemm_f64_threaded(a.data(), b.data(), ref.data(), m, k, n, 1);
    for (int threads : {2, 3, 4, 8}) {
        std::vector<double> out(m * n, -1.0);
        kernels::gemm_f64_threaded(a.data(), b.data(), out.data(), m, k, n, threads);
        INFO("threads=", threads);
        CHECK(bytes_equal(ref, out));
    }
}

TEST_CASE("kernel selection is explicit and reversible") {
    const auto isas = kernels::available();
    for (Isa isa : isas) {
        kernels::select(isa);
        CHECK(kernels::active().isa == isa);
    }
    kernels::select_best();
    CHECK(kernels::active().isa == isas.back());
}
