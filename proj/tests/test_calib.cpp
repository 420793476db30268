#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "espace/calib.hpp"
#include "espace/linalg.hpp"
#include "test_support.hpp"

using namespace espace;
using namespace espace::testing;

namespace {

// Captures warnings for the duration of a test.
struct WarningCapture {
    std::vector<std::string> messages;
    WarningCapture() {
        calib::set_warning_handler([this](const std::string& m) { messages.push_back(m); });
    }
    ~WarningCapture() {
        calib::set_warning_handler(
            [](const std::string&) { /* silenced between tests */ });
    }
};

}  // namespace

TEST_CASE("accumulate_mse matches hand computation") {
    auto acc = calib::make_accumulator(CandidateKind::Mse, 2);
    const Matrix x(2, 2, {2, 0, 0, 1});
    calib::accumulate_mse(acc, x);
    CHECK(acc.batch_count == 1);
    const Matrix c = calib::finalize(acc);
    CHECK(c(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(c(1, 1) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(c(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("accumulate_mse zero batch adds a zero matrix") {
    auto acc = calib::make_accumulator(CandidateKind::Mse, 3);
    calib::accumulate_mse(acc, Matrix(3, 4));
    CHECK(acc.batch_count == 1);
    CHECK(max_abs(calib::finalize(acc)) == 0.0);
}

TEST_CASE("accumulate_mse single column reduces to an outer product") {
    auto acc = calib::make_accumulator(CandidateKind::Mse, 2);
    const Matrix x(2, 1, {3, 4});
    calib::accumulate_mse(acc, x);
    const Matrix c = calib::finalize(acc);
    CHECK(c(0, 0) == doctest::Approx(9.0));
    CHECK(c(0, 1) == doctest::Approx(12.0));
    CHECK(c(1, 1) == doctest::Approx(16.0));
}

TEST_CASE("accumulate_mse kind and shape validation") {
    auto acc = calib::make_accumulator(CandidateKind::Nmse, 2);
    CHECK_THROWS_AS(calib::accumulate_mse(acc, Matrix(2, 2)), DataError);
    auto acc2 = calib::make_accumulator(CandidateKind::Mse, 2);
    CHECK_THROWS_AS(calib::accumulate_mse(acc2, Matrix(3, 2)), ShapeError);
}

TEST_CASE("accumulate_nmse normalizes per column") {
    auto acc = calib::make_accumulator(CandidateKind::Nmse, 2);
    const Matrix x(2, 2, {2, 0, 0, 1});
    calib::accumulate_nmse(acc, x);
    const Matrix c = calib::finalize(acc);
    CHECK(c(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(c(1, 1) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(std::fabs(c(0, 1)) < 1e-15);
}

TEST_CASE("accumulate_nmse single nonzero column has unit trace") {
    auto acc = calib::make_accumulator(CandidateKind::Nmse, 3);
    const Matrix x(3, 1, {1, 2, -2});
    calib::accumulate_nmse(acc, x);
    CHECK(trace(calib::finalize(acc)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("accumulate_nmse is scale invariant") {
    Rng rng(5);
    const Matrix x = Matrix::random_normal(4, 8, rng);
    auto acc1 = calib::make_accumulator(CandidateKind::Nmse, 4);
    auto acc2 = calib::make_accumulator(CandidateKind::Nmse, 4);
    calib::accumulate_nmse(acc1, x);
    calib::accumulate_nmse(acc2, x * 10.0);
    CHECK(max_abs_diff(calib::finalize(acc1), calib::finalize(acc2)) < 1e-12);
}

TEST_CASE("accumulate_nmse skips an all-zero batch with a warning") {
    WarningCapture warnings;
    auto acc = calib::make_accumulator(CandidateKind::Nmse, 2);
    calib::accumulate_nmse(acc, Matrix(2, 3));
    CHECK(acc.batch_count == 0);
    CHECK(warnings.messages.size() == 1);
    // Mixed batch: zero columns skipped, divisor reduced.
    const Matrix x(2, 2, {1, 0, 0, 0});
    calib::accumulate_nmse(acc, x);
    CHECK(acc.batch_count == 1);
    CHECK(trace(calib::finalize(acc)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("weight_corr examples") {
    const Matrix identity_corr = calib::weight_corr(Matrix::identity(2));
    CHECK(identity_corr(0, 0) == doctest::Approx(0.5));
    CHECK(identity_corr(1, 1) == doctest::Approx(0.5));

    CHECK(max_abs(calib::weight_corr(Matrix(3, 4))) == 0.0);

    // Rank-1 W keeps rank 1.
    Rng rng(9);
    Matrix w(3, 4);
    const Matrix u = Matrix::random_normal(3, 1, rng);
    const Matrix v = Matrix::random_normal(1, 4, rng);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) w(i, j) = u(i, 0) * v(0, j);
    const auto evd = linalg::sym_evd(calib::weight_corr(w));
    CHECK(evd.eigenvalues[0] > 1e-9);
    CHECK(std::fabs(evd.eigenvalues[1]) < 1e-12 * evd.eigenvalues[0]);
    CHECK(std::fabs(evd.eigenvalues[2]) < 1e-12 * evd.eigenvalues[0]);
}

TEST_CASE("combine_go diagonal and identity cases") {
    const Matrix cx(2, 2, {2, 0, 0, 1});
    const Matrix cw(2, 2, {3, 0, 0, 4});
    const Matrix c = calib::combine_go(cx, cw, false);
    CHECK(c(0, 0) == doctest::Approx(12.0));
    CHECK(c(1, 1) == doctest::Approx(8.0));
    CHECK(c(0, 1) == 0.0);

    const Matrix doubled = calib::combine_go(cx, Matrix::identity(2), false);
    CHECK(max_abs_diff(doubled, cx * 2.0) < 1e-15);
}

TEST_CASE("combine_go output is symmetric for random symmetric inputs") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Matrix a = random_symmetric(8, seed);
        const Matrix b = random_symmetric(8, seed + 50);
        const Matrix c = calib::combine_go(a, b, false);
        CHECK(max_abs_diff(c, transpose(c)) == 0.0);
    }
}

TEST_CASE("combine_go commuting inputs have eigenvalues 2*lambda*mu") {
    const std::vector<double> lam = {5, 2, 1};
    const std::vector<double> mu = {4, 3, 0.5};
    Matrix cx(3, 3), cw(3, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        cx(i, i) = lam[i];
        cw(i, i) = mu[i];
    }
    const auto evd = linalg::sym_evd(calib::combine_go(cx, cw, false));
    std::vector<double> expected;
    for (std::size_t i = 0; i < 3; ++i) expected.push_back(2.0 * (lam[i] * mu[i]));
    std::sort(expected.rbegin(), expected.rend());
    for (std::size_t i = 0; i < 3; ++i) CHECK(evd.eigenvalues[i] == expected[i]);
}

TEST_CASE("combine_go validates normalized inputs by trace") {
    const Matrix cx(2, 2, {2, 0, 0, 1});  // trace 3, not a normalized matrix
    CHECK_THROWS_AS(calib::combine_go(cx, cx, true), DataError);

    const Matrix unit(2, 2, {0.5, 0, 0, 0.5});
    CHECK_NOTHROW(calib::combine_go(unit, unit, true));
}

TEST_CASE("accumulate_nl hand case and symmetry") {
    auto acc = calib::make_accumulator(CandidateKind::Nl, 2);
    const Matrix x(2, 1, {1, 0});
    calib::accumulate_nl(acc, x, x);
    const Matrix c = calib::finalize(acc);
    CHECK(c(0, 0) == doctest::Approx(2.0));
    CHECK(c(0, 1) == 0.0);
    CHECK(c(1, 1) == 0.0);

    // Zero gradient annihilates both terms.
    auto acc2 = calib::make_accumulator(CandidateKind::Nl, 2);
    calib::accumulate_nl(acc2, x, Matrix(2, 1));
    CHECK(max_abs(calib::finalize(acc2)) == 0.0);

    // Random inputs stay symmetric.
    Rng rng(3);
    const Matrix xr = Matrix::random_normal(5, 7, rng);
    const Matrix gr = Matrix::random_normal(5, 7, rng);
    auto acc3 = calib::make_accumulator(CandidateKind::Nl, 5);
    calib::accumulate_nl(acc3, xr, gr);
    const Matrix c3 = calib::finalize(acc3);
    CHECK(max_abs_diff(c3, transpose(c3)) == 0.0);
}

TEST_CASE("accumulate_nl nl_norm scale invariance and zero-energy skip") {
    Rng rng(8);
    const Matrix x = Matrix::random_normal(4, 6, rng);
    const Matrix g = Matrix::random_normal(4, 6, rng);
    auto acc1 = calib::make_accumulator(CandidateKind::NlNorm, 4);
    auto acc2 = calib::make_accumulator(CandidateKind::NlNorm, 4);
    calib::accumulate_nl(acc1, x, g);
    calib::accumulate_nl(acc2, x * 3.0, g * 0.25);
    CHECK(max_abs_diff(calib::finalize(acc1), calib::finalize(acc2)) <
          1e-12 * max_abs(calib::finalize(acc1)) + 1e-14);

    WarningCapture warnings;
    auto acc3 = calib::make_accumulator(CandidateKind::NlNorm, 4);
    calib::accumulate_nl(acc3, x, Matrix(4, 6));
    CHECK(acc3.batch_count == 0);
    CHECK(warnings.messages.size() == 1);
}

TEST_CASE("finalize averaging") {
    auto acc = calib::make_accumulator(CandidateKind::Mse, 2);
    CHECK_THROWS_AS(calib::finalize(acc), DataError);

    // Batches diag(2,0) and diag(0,2) average to the identity. Columns
    // (2,0),(0,0) give XX^T/M = diag(2,0).
    const Matrix b1(2, 2, {2, 0, 0, 0});
    const Matrix b2(2, 2, {0, 0, 0, 2});
    calib::accumulate_mse(acc, b1);
    const Matrix one = calib::finalize(acc);
    calib::accumulate_mse(acc, b2);
    const Matrix two = calib::finalize(acc);
    CHECK(two(0, 0) == doctest::Approx(1.0));
    CHECK(two(1, 1) == doctest::Approx(1.0));

    // Two identical batches equal one.
    auto acc_same = calib::make_accumulator(CandidateKind::Mse, 2);
    calib::accumulate_mse(acc_same, b1);
    calib::accumulate_mse(acc_same, b1);
    CHECK(max_abs_diff(calib::finalize(acc_same), one) < 1e-15);
}

TEST_CASE("equal-size batch accumulation is order insensitive") {
    Rng rng(17);
    std::vector<Matrix> batches;
    for (int i = 0; i < 8; ++i) batches.push_back(Matrix::random_normal(6, 10, rng));

    auto forward_order = calib::make_accumulator(CandidateKind::Mse, 6);
    for (const auto& b : batches) calib::accumulate_mse(forward_order, b);

    auto reverse_order = calib::make_accumulator(CandidateKind::Mse, 6);
    for (auto it = batches.rbegin(); it != batches.rend(); ++it)
        calib::accumulate_mse(reverse_order, *it);

    const Matrix a = calib::finalize(forward_order);
    const Matrix b = calib::finalize(reverse_order);
    CHECK(max_abs_diff(a, b) <= 1e-10 * trace(a));
}

TEST_CASE("merge combines worker accumulators") {
    Rng rng(21);
    std::vector<Matrix> batches;
    for (int i = 0; i < 6; ++i) batches.push_back(Matrix::random_normal(4, 5, rng));

    auto whole = calib::make_accumulator(CandidateKind::Mse, 4);
    for (const auto& b : batches) calib::accumulate_mse(whole, b);

    auto w1 = calib::make_accumulator(CandidateKind::Mse, 4);
    auto w2 = calib::make_accumulator(CandidateKind::Mse, 4);
    for (int i = 0; i < 3; ++i) calib::accumulate_mse(w1, batches[i]);
    for (int i = 3; i < 6; ++i) calib::accumulate_mse(w2, batches[i]);
    calib::merge(w1, w2);
    CHECK(w1.batch_count == 6);
    CHECK(max_abs_diff(calib::finalize(whole), calib::finalize(w1)) <=
          1e-10 * trace(calib::finalize(whole)));
}

TEST_CASE("finalized mse and nmse estimates are PSD") {
    Rng rng(33);
    for (CandidateKind kind : {CandidateKind::Mse, CandidateKind::Nmse}) {
        auto acc = calib::make_accumulator(kind, 8);
        for (int b = 0; b < 4; ++b) {
            const Matrix x = Matrix::random_normal(8, 12, rng);
            if (kind == CandidateKind::Mse)
                calib::accumulate_mse(acc, x);
            else
                calib::accumulate_nmse(acc, x);
        }
        const Matrix c = calib::finalize(acc);
        const auto evd = linalg::sym_evd(c);
        CHECK(evd.eigenvalues.back() >= -1e-9 * trace(c));
    }
}

TEST_CASE("nmse accumulator trace is one per effective batch") {
    Rng rng(41);
    auto acc = calib::make_accumulator(CandidateKind::Nmse, 5);
    for (int b = 0; b < 3; ++b) calib::accumulate_nmse(acc, Matrix::random_normal(5, 9, rng));
    CHECK(trace(acc.sum) == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(trace(calib::finalize(acc)) == doctest::Approx(1.0).epsilon(1e-10));
}
