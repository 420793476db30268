#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "espace/linalg.hpp"
#include "test_support.hpp"

using namespace espace;
using namespace espace::testing;

TEST_CASE("matmul hand-checked cases") {
    const Matrix a(2, 2, {1, 2, 3, 4});

    SUBCASE("identity") {
        const Matrix r = linalg::matmul(Matrix::identity(2), a);
        CHECK(bitwise_equal(r, a));
    }
    SUBCASE("2x2 times 2x1") {
        const Matrix b(2, 1, {5, 6});
        const Matrix r = linalg::matmul(a, b);
        CHECK(r(0, 0) == 17.0);
        CHECK(r(1, 0) == 39.0);
    }
    SUBCASE("zero annihilates") {
        const Matrix z(2, 2);
        const Matrix b(2, 3, {1, 2, 3, 4, 5, 6});
        CHECK(max_abs(linalg::matmul(z, b)) == 0.0);
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(linalg::matmul(a, Matrix(3, 2)), ShapeError);
    }
}

TEST_CASE("sym_evd diagonal input") {
    const Matrix c(2, 2, {4, 0, 0, 1});
    const auto evd = linalg::sym_evd(c);
    CHECK(evd.eigenvalues[0] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(evd.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));
    // Sign convention makes this exactly the identity.
    CHECK(max_abs_vs_identity(evd.eigenvectors) < 1e-12);
}

TEST_CASE("sym_evd 2x2 hand-solved case") {
    // Characteristic polynomial of [[2,1],[1,2]]: eigenvalues 3 and 1,
    // eigenvectors (1,1)/sqrt(2) and (1,-1)/sqrt(2).
    const Matrix c(2, 2, {2, 1, 1, 2});
    const auto evd = linalg::sym_evd(c);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(evd.eigenvalues[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(evd.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(evd.eigenvectors(0, 0) == doctest::Approx(inv_sqrt2).epsilon(1e-10));
    CHECK(evd.eigenvectors(1, 0) == doctest::Approx(inv_sqrt2).epsilon(1e-10));
    CHECK(evd.eigenvectors(0, 1) == doctest::Approx(inv_sqrt2).epsilon(1e-10));
    CHECK(evd.eigenvectors(1, 1) == doctest::Approx(-inv_sqrt2).epsilon(1e-10));
}

TEST_CASE("sym_evd degenerate spectrum keeps an orthonormal basis") {
    const auto evd = linalg::sym_evd(Matrix::identity(3));
    for (double ev : evd.eigenvalues) CHECK(ev == doctest::Approx(1.0).epsilon(1e-12));
    const Matrix vtv =
        linalg::matmul(transpose(evd.eigenvectors), evd.eigenvectors);
    CHECK(max_abs_vs_identity(vtv) < 1e-10);
}

TEST_CASE("sym_evd input validation") {
    CHECK_THROWS_AS(linalg::sym_evd(Matrix(2, 3)), ShapeError);
    Matrix asym(2, 2, {1, 5, 0, 1});
    CHECK_THROWS_AS(linalg::sym_evd(asym), DataError);
}

TEST_CASE("sym_evd invariants on random symmetric matrices") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        for (std::size_t k : {4u, 16u, 33u}) {
            const Matrix c = random_symmetric(k, seed * 100 + k);
            const auto evd = linalg::sym_evd(c);

            // Orthonormality.
            const Matrix vtv =
                linalg::matmul(transpose(evd.eigenvectors), evd.eigenvectors);
            CHECK(max_abs_vs_identity(vtv) < 1e-10);

            // Reconstruction ||C - V D V^T||_F <= 1e-8 ||C||_F.
            Matrix vd = evd.eigenvectors;
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < k; ++j) vd(i, j) *= evd.eigenvalues[j];
            const Matrix rec = linalg::matmul(vd, transpose(evd.eigenvectors));
            CHECK(frobenius_norm(rec - c) <= 1e-8 * frobenius_norm(c));

            // Eigenpair residual relative to ||C||_F.
            const Matrix cv = linalg::matmul(c, evd.eigenvectors);
            double resid = 0.0;
            for (std::size_t j = 0; j < k; ++j)
                for (std::size_t i = 0; i < k; ++i)
                    resid = std::max(resid, std::fabs(cv(i, j) - evd.eigenvalues[j] *
                                                                     evd.eigenvectors(i, j)));
            CHECK(resid <= 1e-8 * frobenius_norm(c));

            // Trace preservation.
            double ev_sum = 0.0;
            for (double ev : evd.eigenvalues) ev_sum += ev;
            CHECK(ev_sum == doctest::Approx(trace(c)).epsilon(1e-10));

            // Algebraic ordering is descending.
            for (std::size_t j = 1; j < k; ++j)
                CHECK(evd.eigenvalues[j - 1] >= evd.eigenvalues[j]);
        }
    }
}

TEST_CASE("sym_evd absolute-value ordering") {
    const Matrix c(3, 3, {1, 0, 0, 0, -5, 0, 0, 0, 3});
    const auto algebraic = linalg::sym_evd(c, OrderingMode::Algebraic);
    CHECK(algebraic.eigenvalues[0] == doctest::Approx(3.0));
    CHECK(algebraic.eigenvalues[1] == doctest::Approx(1.0));
    CHECK(algebraic.eigenvalues[2] == doctest::Approx(-5.0));

    const auto by_abs = linalg::sym_evd(c, OrderingMode::AbsoluteValue);
    CHECK(by_abs.eigenvalues[0] == doctest::Approx(-5.0));
    CHECK(by_abs.eigenvalues[1] == doctest::Approx(3.0));
    CHECK(by_abs.eigenvalues[2] == doctest::Approx(1.0));
}

TEST_CASE("sym_evd zero matrix") {
    const auto evd = linalg::sym_evd(Matrix(4, 4));
    for (double ev : evd.eigenvalues) CHECK(ev == 0.0);
    CHECK(max_abs_vs_identity(evd.eigenvectors) == 0.0);
}

TEST_CASE("random_orthonormal columns are orthonormal") {
    const Matrix p = linalg::random_orthonormal(8, 3, 42);
    const Matrix ptp = linalg::matmul(transpose(p), p);
    CHECK(max_abs_vs_identity(ptp) <= 1e-10);
}

TEST_CASE("random_orthonormal square case has unit determinant") {
    const Matrix p = linalg::random_orthonormal(4, 4, 7);
    CHECK(std::fabs(std::fabs(det(p)) - 1.0) <= 1e-10);
}

TEST_CASE("random_orthonormal is deterministic per seed") {
    const Matrix a = linalg::random_orthonormal(16, 5, 99);
    const Matrix b = linalg::random_orthonormal(16, 5, 99);
    CHECK(bitwise_equal(a, b));
    const Matrix c = linalg::random_orthonormal(16, 5, 100);
    CHECK(!bitwise_equal(a, c));
}

TEST_CASE("random_orthonormal rejects l > k") {
    CHECK_THROWS_AS(linalg::random_orthonormal(3, 4, 1), ShapeError);
}
