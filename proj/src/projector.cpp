#include "espace/projector.hpp"

namespace espace::projector {

Projection build_projection(const Matrix& c, std::size_t l, OrderingMode ordering) {
    if (c.rows() != c.cols()) throw ShapeError("build_projection: matrix not square");
    const std::size_t k = c.rows();
    if (l < 1 || l > k)
        throw ShapeError("build_projection: need 1 <= l <= K, got l=" + std::to_string(l) +
                         " K=" + std::to_string(k));
    const linalg::EvdResult evd = linalg::sym_evd(c, ordering);
    Projection proj;
    proj.p = Matrix(k, l);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < l; ++j) proj.p(i, j) = evd.eigenvectors(i, j);
    proj.l = l;
    proj.ordering = ordering;
    return proj;
}

double compression_rate(std::size_t k, std::size_t n, std::size_t l) {
    if (k == 0 || n == 0) throw ShapeError("compression_rate: dimensions must be positive");
    return 1.0 - static_cast<double>(l * (k + n)) / static_cast<double>(k * n);
}

std::size_t choose_rank(std::size_t k, std::size_t n, double target_rate) {
    if (k == 0 || n == 0) throw ShapeError("choose_rank: dimensions must be positive");
    // Rate decreases monotonically in l, so the last qualifying power of two
    // is the largest one.
    std::size_t best = 0;
    for (std::size_t l = 1; l <= k; l *= 2) {
        if (compression_rate(k, n, l) >= target_rate) best = l;
        if (l > k / 2) break;  // avoid overflow on l *= 2
    }
    if (best == 0)
        throw PolicyError("choose_rank: no power-of-two rank reaches target rate " +
                          std::to_string(target_rate) + " for K=" + std::to_string(k) +
                          " N=" + std::to_string(n));
    return best;
}

Matrix project_activations(const Projection& p, const Matrix& x) {
    if (x.rows() != p.p.rows())
        throw ShapeError("project_activations: X has " + std::to_string(x.rows()) +
                         " rows, projection is for K=" + std::to_string(p.p.rows()));
    return linalg::matmul(transpose(p.p), x);
}

Matrix reconstruct(const Projection& p, const Matrix& x) {
    return linalg::matmul(p.p, project_activations(p, x));
}

Matrix fold_weights(const Projection& p, const Matrix& w) {
    if (w.rows() != p.p.rows())
        throw ShapeError("fold_weights: W has " + std::to_string(w.rows()) +
                         " rows, projection is for K=" + std::to_string(p.p.rows()));
    return linalg::matmul(transpose(p.p), w);
}

}  // namespace espace::projector
