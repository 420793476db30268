#pragma once

#include <cstdint>
#include <vector>

#include "espace/matrix.hpp"
#include "espace/types.hpp"

namespace espace::linalg {

// Eigen-decomposition of a symmetric matrix. Columns of `eigenvectors` pair
// with `eigenvalues`, sorted descending per the requested ordering
// (algebraic, or by absolute value).
struct EvdResult {
    std::vector<double> eigenvalues;
    Matrix eigenvectors;
};

// Standard product a.b with a fixed ascending-k accumulation order, so the
// result is bit-reproducible per build.
Matrix matmul(const Matrix& a, const Matrix& b);

// Cyclic Jacobi on the symmetrized input, iterated until the off-diagonal
// Frobenius norm falls below 1e-12 * ||c||_F. Input must be square and
// symmetric within 1e-9 relative to its Frobenius norm.
EvdResult sym_evd(const Matrix& c, OrderingMode ordering = OrderingMode::Algebraic,
                  int max_sweeps = 100);

// k x l matrix with orthonormal columns obtained by twice-iterated
// Gram-Schmidt on a seeded standard-normal draw. Deterministic per seed.
Matrix random_orthonormal(std::size_t k, std::size_t l, std::uint64_t seed);

}  // namespace espace::linalg
