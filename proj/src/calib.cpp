#include "espace/calib.hpp"

#include <cmath>
#include <iostream>
#include <utility>

#include "espace/linalg.hpp"

namespace espace::calib {

namespace {

std::function<void(const std::string&)>& warning_handler() {
    static std::function<void(const std::string&)> handler = [](const std::string& msg) {
        std::cerr << "[calib] warning: " << msg << "\n";
    };
    return handler;
}

void warn(const std::string& msg) { warning_handler()(msg); }

void require_kind(const CorrAccumulator& acc, CandidateKind kind, const char* op) {
    if (acc.kind != kind)
        throw DataError(std::string(op) + ": accumulator kind is " + kind_name(acc.kind));
}

void require_rows(const CorrAccumulator& acc, const Matrix& x, const char* op) {
    if (x.rows() != acc.k)
        throw ShapeError(std::string(op) + ": batch has " + std::to_string(x.rows()) +
                         " rows, accumulator is for K=" + std::to_string(acc.k));
    if (x.cols() == 0) throw ShapeError(std::string(op) + ": batch has no columns");
}

void add_symmetrized(CorrAccumulator& acc, const Matrix& c) {
    acc.sum = symmetrize(acc.sum + c);
    acc.batch_count += 1;
}

// Mean outer product of the L2-normalized columns of x; returns false if
// every column is below the zero-norm threshold.
bool normalized_corr(const Matrix& x, Matrix& out) {
    const std::size_t k = x.rows();
    Matrix kept(k, x.cols());
    std::size_t n_kept = 0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        const double norm = std::sqrt(column_sq_norm(x, j));
        if (norm < 1e-12) continue;
        for (std::size_t i = 0; i < k; ++i) kept(i, n_kept) = x(i, j) / norm;
        ++n_kept;
    }
    if (n_kept == 0) return false;
    Matrix xn(k, n_kept);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < n_kept; ++j) xn(i, j) = kept(i, j);
    out = linalg::matmul(xn, transpose(xn)) * (1.0 / static_cast<double>(n_kept));
    return true;
}

}  // namespace

CorrAccumulator make_accumulator(CandidateKind kind, std::size_t k) {
    if (k == 0) throw ShapeError("make_accumulator: K must be positive");
    return CorrAccumulator{kind, k, Matrix(k, k), 0};
}

void accumulate_mse(CorrAccumulator& acc, const Matrix& x) {
    require_kind(acc, CandidateKind::Mse, "accumulate_mse");
    require_rows(acc, x, "accumulate_mse");
    const double m = static_cast<double>(x.cols());
    add_symmetrized(acc, linalg::matmul(x, transpose(x)) * (1.0 / m));
}

void accumulate_nmse(CorrAccumulator& acc, const Matrix& x) {
    require_kind(acc, CandidateKind::Nmse, "accumulate_nmse");
    require_rows(acc, x, "accumulate_nmse");
    Matrix c;
    if (!normalized_corr(x, c)) {
        warn("accumulate_nmse: all columns below zero-norm threshold, batch skipped");
        return;
    }
    add_symmetrized(acc, c);
}

void accumulate_nl(CorrAccumulator& acc, const Matrix& x, const Matrix& g) {
    if (acc.kind != CandidateKind::Nl && acc.kind != CandidateKind::NlNorm)
        throw DataError("accumulate_nl: accumulator kind is " +
                        std::string(kind_name(acc.kind)));
    require_rows(acc, x, "accumulate_nl");
    if (!x.same_shape(g))
        throw ShapeError("accumulate_nl: activation and gradient shapes differ");

    const double m = static_cast<double>(x.cols());
    double scale = 1.0 / (m * m);
    if (acc.kind == CandidateKind::NlNorm) {
        const double x_energy = frobenius_norm(x);
        const double g_energy = frobenius_norm(g);
        const double denom = (x_energy * x_energy / m) * (g_energy * g_energy / m);
        if (denom < 1e-24) {
            warn("accumulate_nl: zero-energy batch skipped in nl_norm mode");
            return;
        }
        scale /= denom;
    }
    const Matrix xxt = linalg::matmul(x, transpose(x));
    const Matrix ggt = linalg::matmul(g, transpose(g));
    const Matrix cross = linalg::matmul(xxt, ggt);
    add_symmetrized(acc, (cross + transpose(cross)) * scale);
}

Matrix finalize(const CorrAccumulator& acc) {
    if (acc.batch_count == 0)
        throw DataError("finalize: no calibration batches accumulated for kind " +
                        std::string(kind_name(acc.kind)));
    return symmetrize(acc.sum * (1.0 / static_cast<double>(acc.batch_count)));
}

void merge(CorrAccumulator& into, const CorrAccumulator& other) {
    if (into.kind != other.kind || into.k != other.k)
        throw DataError("merge: accumulator kind/K mismatch");
    into.sum = symmetrize(into.sum + other.sum);
    into.batch_count += other.batch_count;
}

Matrix weight_corr(const Matrix& w) {
    if (w.rows() == 0 || w.cols() == 0) throw ShapeError("weight_corr: empty weight matrix");
    const double n = static_cast<double>(w.cols());
    return symmetrize(linalg::matmul(w, transpose(w)) * (1.0 / n));
}

Matrix weight_corr_normalized(const Matrix& w) {
    if (w.rows() == 0 || w.cols() == 0)
        throw ShapeError("weight_corr_normalized: empty weight matrix");
    Matrix c;
    if (!normalized_corr(w, c))
        throw DataError("weight_corr_normalized: all weight columns are zero");
    return symmetrize(c);
}

Matrix combine_go(const Matrix& c_x, const Matrix& c_w, bool normalized) {
    if (c_x.rows() != c_x.cols() || !c_x.same_shape(c_w))
        throw ShapeError("combine_go: inputs must be square and of equal size");
    if (normalized) {
        // Unit-trace variants; a plain C_X here is a kind mix-up.
        if (std::fabs(trace(c_x) - 1.0) > 1e-6 || std::fabs(trace(c_w) - 1.0) > 1e-6)
            throw DataError("combine_go: normalized inputs must have unit trace");
    }
    const Matrix ab = linalg::matmul(c_x, c_w);
    return ab + transpose(ab);
}

void set_warning_handler(std::function<void(const std::string&)> handler) {
    warning_handler() = std::move(handler);
}

}  // namespace espace::calib
