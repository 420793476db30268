#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "espace/calib.hpp"
#include "espace/projector.hpp"
#include "test_support.hpp"

using namespace espace;
using namespace espace::testing;

namespace {

// Empirical mean squared reconstruction error, written out independently of
// the fidelity module.
double empirical_mse(const Matrix& x, const Matrix& p) {
    const Matrix xr = linalg::matmul(p, linalg::matmul(transpose(p), x));
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x.data()[i] - xr.data()[i];
        total += d * d;
    }
    return total / static_cast<double>(x.cols());
}

double rayleigh_sum(const Matrix& c, const Matrix& p) {
    return trace(linalg::matmul(transpose(p), linalg::matmul(c, p)));
}

}  // namespace

TEST_CASE("build_projection axis cases") {
    const Matrix c(2, 2, {4, 0, 0, 1});
    const auto proj = projector::build_projection(c, 1);
    CHECK(proj.l == 1);
    CHECK(proj.p(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(proj.p(1, 0) == doctest::Approx(0.0));

    const Matrix c2(2, 2, {2, 1, 1, 2});
    const auto proj2 = projector::build_projection(c2, 1);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(proj2.p(0, 0) == doctest::Approx(inv_sqrt2).epsilon(1e-10));
    CHECK(proj2.p(1, 0) == doctest::Approx(inv_sqrt2).epsilon(1e-10));
}

TEST_CASE("build_projection full rank gives an orthogonal square matrix") {
    const Matrix c = random_psd(6, 12, 77);
    const auto proj = projector::build_projection(c, 6);
    const Matrix ppt = linalg::matmul(proj.p, transpose(proj.p));
    CHECK(max_abs_vs_identity(ppt) < 1e-10);
}

TEST_CASE("build_projection range validation") {
    const Matrix c = random_psd(4, 8, 5);
    CHECK_THROWS_AS(projector::build_projection(c, 0), ShapeError);
    CHECK_THROWS_AS(projector::build_projection(c, 5), ShapeError);
    CHECK_THROWS_AS(projector::build_projection(Matrix(2, 3), 1), ShapeError);
}

TEST_CASE("choose_rank reproduces the published per-layer ranks") {
    CHECK(projector::choose_rank(2048, 6144) == 512);
    CHECK(projector::choose_rank(2048, 2048) == 512);
    CHECK(projector::choose_rank(2048, 8192) == 512);
    CHECK(projector::choose_rank(8192, 2048) == 512);
}

TEST_CASE("choose_rank edge behavior") {
    // target 0: largest power of two with nonnegative rate.
    CHECK(projector::choose_rank(16, 16, 0.0) == 8);
    // Unreachable target.
    CHECK_THROWS_AS(projector::choose_rank(64, 64, 1.0), PolicyError);
    // Output is always a power of two meeting the bound.
    for (std::size_t k : {16u, 64u, 256u})
        for (std::size_t n : {16u, 48u, 1024u}) {
            const std::size_t l = projector::choose_rank(k, n, 0.5);
            CHECK((l & (l - 1)) == 0);
            CHECK(projector::compression_rate(k, n, l) >= 0.5);
            // Largest such power of two: doubling it must break the bound
            // (or overflow past K).
            if (2 * l <= k) CHECK(projector::compression_rate(k, n, 2 * l) < 0.5);
        }
}

TEST_CASE("compression_rate values") {
    CHECK(projector::compression_rate(2048, 2048, 512) == 0.5);
    CHECK(projector::compression_rate(2048, 8192, 512) == doctest::Approx(0.6875));
    CHECK(projector::compression_rate(2048, 6144, 512) == doctest::Approx(2.0 / 3.0));
    CHECK(projector::compression_rate(5, 7, 0) == 1.0);
    // Factorization can expand a layer; the value goes negative.
    CHECK(projector::compression_rate(4, 4, 4) == doctest::Approx(-1.0));
}

TEST_CASE("project, reconstruct, fold hand cases") {
    projector::Projection axis;
    axis.p = Matrix(2, 1, {1, 0});
    axis.l = 1;

    const Matrix x(2, 1, {3, 4});
    const Matrix z = projector::project_activations(axis, x);
    CHECK(z.rows() == 1);
    CHECK(z(0, 0) == 3.0);

    const Matrix xr = projector::reconstruct(axis, x);
    CHECK(xr(0, 0) == 3.0);
    CHECK(xr(1, 0) == 0.0);

    projector::Projection diag2;
    diag2.p = Matrix(2, 1, {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)});
    diag2.l = 1;
    const Matrix ones(2, 1, {1, 1});
    CHECK(projector::project_activations(diag2, ones)(0, 0) ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    // x orthogonal to the retained subspace reconstructs to zero.
    const Matrix perp(2, 1, {0, 5});
    CHECK(max_abs(projector::reconstruct(axis, perp)) == 0.0);

    // Fold with P = I leaves W unchanged; P = e1 selects the first row.
    projector::Projection full;
    full.p = Matrix::identity(2);
    full.l = 2;
    const Matrix w(2, 3, {1, 2, 3, 4, 5, 6});
    CHECK(bitwise_equal(projector::fold_weights(full, w), w));
    const Matrix folded = projector::fold_weights(axis, w);
    CHECK(folded.rows() == 1);
    CHECK(folded(0, 0) == 1.0);
    CHECK(folded(0, 2) == 3.0);
}

TEST_CASE("full-rank projection is an isometry and exact reconstruction") {
    const Matrix p = linalg::random_orthonormal(8, 8, 3);
    projector::Projection proj;
    proj.p = p;
    proj.l = 8;
    Rng rng(4);
    const Matrix x = Matrix::random_normal(8, 5, rng);
    CHECK(std::fabs(frobenius_norm(projector::project_activations(proj, x)) -
                    frobenius_norm(x)) < 1e-10);
    CHECK(max_abs_diff(projector::reconstruct(proj, x), x) < 1e-10);
}

TEST_CASE("folding identity: (P^T W)^T (P^T X) equals W^T (P P^T X)") {
    Rng rng(6);
    const Matrix w = Matrix::random_normal(16, 16, rng);
    const Matrix x = Matrix::random_normal(16, 16, rng);
    projector::Projection proj;
    proj.p = linalg::random_orthonormal(16, 5, 8);
    proj.l = 5;

    const Matrix folded = projector::fold_weights(proj, w);
    const Matrix via_folded =
        linalg::matmul(transpose(folded), projector::project_activations(proj, x));
    const Matrix via_reconstruct =
        linalg::matmul(transpose(w), projector::reconstruct(proj, x));
    CHECK(max_abs_diff(via_folded, via_reconstruct) <= 1e-12);
}

TEST_CASE("eigen projection beats random competitors on empirical mse") {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        Rng rng(seed);
        const Matrix x = Matrix::random_normal(16, 64, rng);
        const Matrix c =
            symmetrize(linalg::matmul(x, transpose(x)) * (1.0 / 64.0));
        const auto proj = projector::build_projection(c, 4);
        const double eig_mse = empirical_mse(x, proj.p);
        for (int comp = 0; comp < 100; ++comp) {
            const Matrix q = linalg::random_orthonormal(16, 4, seed * 1000 + comp);
            CHECK(eig_mse <= empirical_mse(x, q) + 1e-10);
        }
    }
}

TEST_CASE("eigen projection maximizes the Rayleigh sum (algebraic ordering)") {
    for (std::uint64_t seed : {21u, 22u}) {
        Rng rng(seed);
        const Matrix x = Matrix::random_normal(12, 40, rng);
        const Matrix w = Matrix::random_normal(12, 20, rng);
        const Matrix c_x = symmetrize(linalg::matmul(x, transpose(x)) * (1.0 / 40.0));
        const Matrix go = calib::combine_go(c_x, calib::weight_corr(w), false);
        const auto proj = projector::build_projection(go, 3, OrderingMode::Algebraic);
        const double best = rayleigh_sum(go, proj.p);
        for (int comp = 0; comp < 100; ++comp) {
            const Matrix q = linalg::random_orthonormal(12, 3, seed * 777 + comp);
            CHECK(best >= rayleigh_sum(go, q) - 1e-10);
        }
    }
}

TEST_CASE("mse spectral identity on exact calibration data") {
    Rng rng(31);
    const Matrix x = Matrix::random_normal(10, 50, rng);
    const Matrix c = symmetrize(linalg::matmul(x, transpose(x)) * (1.0 / 50.0));
    const auto evd = linalg::sym_evd(c);
    for (std::size_t l : {1u, 3u, 7u, 10u}) {
        const auto proj = projector::build_projection(c, l);
        double retained = 0.0;
        for (std::size_t i = 0; i < l; ++i) retained += evd.eigenvalues[i];
        const double expected = trace(c) - retained;
        const double got = empirical_mse(x, proj.p);
        CHECK(std::fabs(got - expected) <= 1e-8 * std::max(std::fabs(expected), trace(c)));
    }
}

TEST_CASE("reconstruction never expands a vector") {
    for (std::uint64_t seed : {41u, 42u, 43u}) {
        const std::size_t k = 8 + 8 * (seed % 3);
        const Matrix p = linalg::random_orthonormal(k, 1 + seed % k, seed);
        projector::Projection proj;
        proj.p = p;
        proj.l = p.cols();
        Rng rng(seed + 7);
        const Matrix x = Matrix::random_normal(k, 200, rng);
        const Matrix xr = projector::reconstruct(proj, x);
        for (std::size_t j = 0; j < x.cols(); ++j)
            CHECK(column_sq_norm(xr, j) <= column_sq_norm(x, j) + 1e-12);
    }
}
