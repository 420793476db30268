#pragma once

#include <string>

#include "espace/matrix.hpp"
#include "espace/projector.hpp"
#include "espace/types.hpp"

namespace espace::fidelity {

// Decomposition fidelity metrics and their upper bounds for one
// (layer, candidate) pair. The bounds dominate their metrics pointwise
// before averaging, so the *_mse <= *_bound relation holds exactly up to
// rounding.
struct FidelityReport {
    std::string layer_id;
    CandidateKind kind = CandidateKind::Mse;
    double mse = 0.0;
    double nmse = 0.0;
    double go_mse = 0.0;
    double go_bound = 0.0;
    double nl_mse_taylor = 0.0;
    double nl_bound = 0.0;
};

// Mean squared reconstruction error over columns: (1/M) sum ||x_m - x~_m||^2.
double mse(const Matrix& x, const projector::Projection& p);

// Mean over columns of ||x_m - x~_m||^2 / ||x_m||^2; zero-norm columns are
// skipped. Throws DataError if every column is zero.
double nmse(const Matrix& x, const projector::Projection& p);

// Mean over all output scalars of (y - y~)^2, with Y = W^T X and
// Y~ = W^T (P P^T X).
double go_mse(const Matrix& w, const Matrix& x, const projector::Projection& p);

// Mean over (n, m) of 2||w_n||^2 ||x_m||^2 - 2 <w_n,x_m> <w_n,x~_m>.
double go_bound(const Matrix& w, const Matrix& x, const projector::Projection& p);

// Mean over columns of (g_m^T (x~_m - x_m))^2, the first-order Taylor form
// of the squared loss change.
double nl_mse_taylor(const Matrix& g, const Matrix& x, const projector::Projection& p);

// Mean over columns of 2||g_m||^2 ||x_m||^2 - 2 <g_m,x_m> <g_m,x~_m>.
double nl_bound(const Matrix& g, const Matrix& x, const projector::Projection& p);

// All six numbers for one layer/candidate.
FidelityReport evaluate(const std::string& layer_id, const Matrix& w, const Matrix& x,
                        const Matrix& g, const projector::Projection& p);

}  // namespace espace::fidelity
