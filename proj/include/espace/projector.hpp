#pragma once

#include <cstddef>
#include <string>

#include "espace/linalg.hpp"
#include "espace/matrix.hpp"
#include "espace/types.hpp"

namespace espace::projector {

// Orthonormal K x L projection attached to one GEMM layer.
struct Projection {
    std::string layer_id;
    CandidateKind kind = CandidateKind::Mse;
    Matrix p;  // K x L, orthonormal columns
    std::size_t l = 0;
    OrderingMode ordering = OrderingMode::Algebraic;
};

// First l eigenvector columns of sym_evd(c, ordering). layer_id/kind are
// left for the caller to fill.
Projection build_projection(const Matrix& c, std::size_t l,
                            OrderingMode ordering = OrderingMode::Algebraic);

// Fraction of per-layer inference parameters removed: 1 - l(k+n)/(kn).
// May be negative when the factorization expands the layer.
double compression_rate(std::size_t k, std::size_t n, std::size_t l);

// Largest power-of-two l (<= k) whose compression rate meets target_rate.
// Throws PolicyError when no power of two qualifies.
std::size_t choose_rank(std::size_t k, std::size_t n, double target_rate = 0.5);

// P^T X: project activations into the retained subspace.
Matrix project_activations(const Projection& p, const Matrix& x);

// P P^T X: rank-l reconstruction.
Matrix reconstruct(const Projection& p, const Matrix& x);

// P^T W: the folded weight stored for inference alongside P.
Matrix fold_weights(const Projection& p, const Matrix& w);

}  // namespace espace::projector
