#include "espace/fidelity.hpp"

#include <cmath>

namespace espace::fidelity {

namespace {

void require_rows(const Matrix& m, const projector::Projection& p, const char* op) {
    if (m.rows() != p.p.rows())
        throw ShapeError(std::string(op) + ": input rows " + std::to_string(m.rows()) +
                         " do not match projection K=" + std::to_string(p.p.rows()));
}

}  // namespace

double mse(const Matrix& x, const projector::Projection& p) {
    require_rows(x, p, "mse");
    const Matrix xr = projector::reconstruct(p, x);
    double total = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const double d = x(i, j) - xr(i, j);
            total += d * d;
        }
    }
    return total / static_cast<double>(x.cols());
}

double nmse(const Matrix& x, const projector::Projection& p) {
    require_rows(x, p, "nmse");
    const Matrix xr = projector::reconstruct(p, x);
    double total = 0.0;
    std::size_t kept = 0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        const double sq = column_sq_norm(x, j);
        if (std::sqrt(sq) < 1e-12) continue;
        double err = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const double d = x(i, j) - xr(i, j);
            err += d * d;
        }
        total += err / sq;
        ++kept;
    }
    if (kept == 0) throw DataError("nmse: all activation columns are zero");
    return total / static_cast<double>(kept);
}

double go_mse(const Matrix& w, const Matrix& x, const projector::Projection& p) {
    require_rows(x, p, "go_mse");
    if (w.rows() != x.rows()) throw ShapeError("go_mse: W and X row counts differ");
    const Matrix wt = transpose(w);
    const Matrix y = linalg::matmul(wt, x);
    const Matrix yr = linalg::matmul(wt, projector::reconstruct(p, x));
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y.data()[i] - yr.data()[i];
        total += d * d;
    }
    return total / static_cast<double>(y.size());
}

double go_bound(const Matrix& w, const Matrix& x, const projector::Projection& p) {
    require_rows(x, p, "go_bound");
    if (w.rows() != x.rows()) throw ShapeError("go_bound: W and X row counts differ");
    const Matrix wt = transpose(w);
    const Matrix xr = projector::reconstruct(p, x);
    const Matrix y = linalg::matmul(wt, x);    // <w_n, x_m>
    const Matrix yr = linalg::matmul(wt, xr);  // <w_n, x~_m>
    std::vector<double> w_sq(w.cols()), x_sq(x.cols());
    for (std::size_t n = 0; n < w.cols(); ++n) w_sq[n] = column_sq_norm(w, n);
    for (std::size_t m = 0; m < x.cols(); ++m) x_sq[m] = column_sq_norm(x, m);
    double total = 0.0;
    for (std::size_t n = 0; n < w.cols(); ++n)
        for (std::size_t m = 0; m < x.cols(); ++m)
            total += 2.0 * w_sq[n] * x_sq[m] - 2.0 * y(n, m) * yr(n, m);
    return total / static_cast<double>(w.cols() * x.cols());
}

double nl_mse_taylor(const Matrix& g, const Matrix& x, const projector::Projection& p) {
    require_rows(x, p, "nl_mse_taylor");
    if (!g.same_shape(x)) throw ShapeError("nl_mse_taylor: gradient and activation shapes differ");
    const Matrix xr = projector::reconstruct(p, x);
    double total = 0.0;
    for (std::size_t m = 0; m < x.cols(); ++m) {
        double d = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) d += g(i, m) * (xr(i, m) - x(i, m));
        total += d * d;
    }
    return total / static_cast<double>(x.cols());
}

double nl_bound(const Matrix& g, const Matrix& x, const projector::Projection& p) {
    require_rows(x, p, "nl_bound");
    if (!g.same_shape(x)) throw ShapeError("nl_bound: gradient and activation shapes differ");
    const Matrix xr = projector::reconstruct(p, x);
    double total = 0.0;
    for (std::size_t m = 0; m < x.cols(); ++m) {
        const double g_sq = column_sq_norm(g, m);
        const double x_sq = column_sq_norm(x, m);
        const double gx = column_dot(g, x, m);
        double gxr = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) gxr += g(i, m) * xr(i, m);
        total += 2.0 * g_sq * x_sq - 2.0 * gx * gxr;
    }
    return total / static_cast<double>(x.cols());
}

FidelityReport evaluate(const std::string& layer_id, const Matrix& w, const Matrix& x,
                        const Matrix& g, const projector::Projection& p) {
    FidelityReport r;
    r.layer_id = layer_id;
    r.kind = p.kind;
    r.mse = mse(x, p);
    r.nmse = nmse(x, p);
    r.go_mse = go_mse(w, x, p);
    r.go_bound = go_bound(w, x, p);
    r.nl_mse_taylor = nl_mse_taylor(g, x, p);
    r.nl_bound = nl_bound(g, x, p);
    return r;
}

}  // namespace espace::fidelity
