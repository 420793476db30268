#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "espace/matrix.hpp"
#include "espace/types.hpp"

namespace espace::calib {

// Running batch-averaged estimate of one of the six correlation matrices.
// Single-writer; merge() combines per-worker accumulators.
struct CorrAccumulator {
    CandidateKind kind;
    std::size_t k = 0;
    Matrix sum;
    std::size_t batch_count = 0;
};

CorrAccumulator make_accumulator(CandidateKind kind, std::size_t k);

// Adds X.X^T / M (one batch of the plain auto-correlation estimate).
void accumulate_mse(CorrAccumulator& acc, const Matrix& x);

// Adds the mean outer product of L2-normalized columns. Columns with norm
// below 1e-12 are skipped and the divisor reduced; an all-zero batch
// accumulates nothing and emits a warning.
void accumulate_nmse(CorrAccumulator& acc, const Matrix& x);

// Adds the per-sequence estimate (XX^T GG^T + GG^T XX^T) / M^2. For NlNorm
// the contribution is further divided by (||X||_F^2/M) * (||G||_F^2/M); a
// zero-energy batch is skipped with a warning in that mode.
void accumulate_nl(CorrAccumulator& acc, const Matrix& x, const Matrix& g);

// sum / batch_count, explicitly symmetrized.
Matrix finalize(const CorrAccumulator& acc);

// Order-insensitive combination of two accumulators of the same kind/k.
void merge(CorrAccumulator& into, const CorrAccumulator& other);

// Weight auto-correlation W.W^T / N.
Matrix weight_corr(const Matrix& w);

// Unit-trace-per-sample variant: mean outer product of L2-normalized weight
// columns. This is the C_W counterpart required by the normalized GO matrix.
Matrix weight_corr_normalized(const Matrix& w);

// C = Cx.Cw + Cw.Cx. With `normalized` set, both inputs must be the
// unit-trace variants (checked loosely via their traces).
Matrix combine_go(const Matrix& c_x, const Matrix& c_w, bool normalized);

// Warnings (skipped batches etc.) go through here; defaults to stderr.
void set_warning_handler(std::function<void(const std::string&)> handler);

}  // namespace espace::calib
