#include "espace/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "espace/kernels.hpp"

namespace espace::linalg {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions disagree, " + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()));
    Matrix c(a.rows(), b.cols());
    kernels::active().gemm_f64(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
    ensure_finite(c, "matmul");
    return c;
}

namespace {

double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

// First component clearly away from rotation noise decides the sign.
void fix_column_signs(Matrix& v) {
    for (std::size_t j = 0; j < v.cols(); ++j) {
        double lead = 0.0;
        for (std::size_t i = 0; i < v.rows(); ++i) {
            if (std::fabs(v(i, j)) > 1e-9) {
                lead = v(i, j);
                break;
            }
        }
        if (lead < 0.0)
            for (std::size_t i = 0; i < v.rows(); ++i) v(i, j) = -v(i, j);
    }
}

}  // namespace

EvdResult sym_evd(const Matrix& c, OrderingMode ordering, int max_sweeps) {
    if (c.rows() != c.cols())
        throw ShapeError("sym_evd: matrix not square, " + std::to_string(c.rows()) + "x" +
                         std::to_string(c.cols()));
    const std::size_t k = c.rows();
    const double cnorm = frobenius_norm(c);

    double asym = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j)
            asym = std::max(asym, std::fabs(c(i, j) - c(j, i)));
    if (asym > 1e-9 * std::max(cnorm, 1e-300))
        throw DataError("sym_evd: input asymmetric beyond 1e-9 relative (max " +
                        std::to_string(asym) + ")");

    Matrix a = symmetrize(c);
    // Rows of vt are the eigenvectors; contiguous, so rotations go through
    // the rot2 kernel.
    Matrix vt = Matrix::identity(k);
    const auto& kt = kernels::active();

    const double target = 1e-12 * cnorm;
    bool converged = cnorm == 0.0 || off_diagonal_norm(a) <= target;
    int sweep = 0;
    while (!converged) {
        if (sweep++ >= max_sweeps)
            throw NumericalError("sym_evd: no convergence after " +
                                 std::to_string(max_sweeps) + " sweeps, off-diagonal " +
                                 std::to_string(off_diagonal_norm(a)) + " > target " +
                                 std::to_string(target));
        for (std::size_t p = 0; p < k - 1; ++p) {
            for (std::size_t q = p + 1; q < k; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t =
                    (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::hypot(theta, 1.0));
                const double cs = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * cs;
                const double tau = sn / (1.0 + cs);

                const double app = a(p, p);
                const double aqq = a(q, q);
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t r = 0; r < k; ++r) {
                    if (r == p || r == q) continue;
                    const double arp = a(r, p);
                    const double arq = a(r, q);
                    a(r, p) = a(p, r) = arp - sn * (arq + tau * arp);
                    a(r, q) = a(q, r) = arq + sn * (arp - tau * arq);
                }
                // Accumulate V <- V.J by rotating the eigenvector rows of vt.
                kt.rot2(vt.row(p), vt.row(q), k, cs, sn);
            }
        }
        converged = off_diagonal_norm(a) <= target;
    }

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    if (ordering == OrderingMode::Algebraic) {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
    } else {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            const double ax = std::fabs(a(x, x));
            const double ay = std::fabs(a(y, y));
            if (ax != ay) return ax > ay;
            return a(x, x) > a(y, y);
        });
    }

    EvdResult res;
    res.eigenvalues.resize(k);
    res.eigenvectors = Matrix(k, k);
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t src = order[j];
        res.eigenvalues[j] = a(src, src);
        for (std::size_t i = 0; i < k; ++i) res.eigenvectors(i, j) = vt(src, i);
    }
    fix_column_signs(res.eigenvectors);
    ensure_finite(res.eigenvectors, "sym_evd");
    return res;
}

Matrix random_orthonormal(std::size_t k, std::size_t l, std::uint64_t seed) {
    if (l > k || l == 0)
        throw ShapeError("random_orthonormal: need 1 <= l <= k, got l=" + std::to_string(l) +
                         " k=" + std::to_string(k));
    Rng rng(seed);
    Matrix p(k, l);
    std::vector<double> v(k);
    for (std::size_t j = 0; j < l; ++j) {
        while (true) {
            for (std::size_t i = 0; i < k; ++i) v[i] = rng.normal();
            // Two Gram-Schmidt passes against the settled columns.
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t jj = 0; jj < j; ++jj) {
                    double d = 0.0;
                    for (std::size_t i = 0; i < k; ++i) d += p(i, jj) * v[i];
                    for (std::size_t i = 0; i < k; ++i) v[i] -= d * p(i, jj);
                }
            }
            double norm = 0.0;
            for (std::size_t i = 0; i < k; ++i) norm += v[i] * v[i];
            norm = std::sqrt(norm);
            if (norm > 1e-8) {
                for (std::size_t i = 0; i < k; ++i) p(i, j) = v[i] / norm;
                break;
            }
            // Degenerate draw; take the next one from the stream.
        }
    }
    ensure_finite(p, "random_orthonormal");
    return p;
}

}  // namespace espace::linalg
