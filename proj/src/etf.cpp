#include "owd/etf.hpp"

#include <cmath>
#include <stdexcept>

#include "owd/rng.hpp"

namespace owd {

namespace {

// One modified Gram-Schmidt sweep over the rows of m, in place.
void orthonormalize_pass(Mat& m) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        auto ri = m.row(i);
        for (std::size_t j = 0; j < i; ++j) {
            auto rj = m.row(j);
            const double proj = dot(ri, rj);
            for (std::size_t k = 0; k < m.cols; ++k) ri[k] -= proj * rj[k];
        }
        const double len = norm(ri);
        if (len < 1e-12)
            throw std::runtime_error("build_orthonormal_rows: degenerate Gaussian draw");
        for (std::size_t k = 0; k < m.cols; ++k) ri[k] /= len;
    }
}

}  // namespace

Mat build_orthonormal_rows(std::uint64_t seed, std::size_t num_rows, std::size_t dim) {
    if (num_rows == 0) throw std::invalid_argument("build_orthonormal_rows: K must be positive");
    if (dim < num_rows)
        throw std::invalid_argument("build_orthonormal_rows: d < K has no orthonormal rows");

    Rng rng(seed);
    Mat q(num_rows, dim);
    for (double& v : q.data) v = rng.normal();

    // Two MGS sweeps keep Q Q^T within ~1e-15 of identity even at K = d = 128.
    orthonormalize_pass(q);
    orthonormalize_pass(q);
    return q;
}

EtfFrame EtfFrame::build(std::size_t num_vectors, std::size_t feature_dim, std::uint64_t seed) {
    if (num_vectors < 2 || num_vectors % 2 != 0)
        throw std::invalid_argument("EtfFrame: K must be even and >= 2");
    if (feature_dim < num_vectors)
        throw std::invalid_argument("EtfFrame: requires d >= K");

    const std::size_t k = num_vectors;
    const std::size_t d = feature_dim;
    Mat q = build_orthonormal_rows(seed, k, d);

    // W = sqrt(K/(K-1)) (I - 11^T/K) Q: subtract the column mean of Q's rows,
    // then rescale. Gram becomes exactly the simplex pattern.
    Vec col_mean(d, 0.0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < d; ++j) col_mean[j] += q(i, j);
    for (double& v : col_mean) v /= static_cast<double>(k);

    const double scale = std::sqrt(static_cast<double>(k) / static_cast<double>(k - 1));
    EtfFrame frame;
    frame.seed_ = seed;
    frame.basis_ = Mat(k, d);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < d; ++j)
            frame.basis_(i, j) = scale * (q(i, j) - col_mean[j]);

    const std::size_t half = k / 2;
    frame.known_half_ = Mat(half, d);
    frame.unknown_half_ = Mat(half, d);
    for (std::size_t i = 0; i < half; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            frame.known_half_(i, j) = frame.basis_(i, j);
            frame.unknown_half_(i, j) = frame.basis_(half + i, j);
        }
    return frame;
}

EtfFrame build_simplex_etf(std::size_t num_vectors, std::size_t feature_dim, std::uint64_t seed) {
    return EtfFrame::build(num_vectors, feature_dim, seed);
}

std::pair<const Mat&, const Mat&> split_subspaces(const EtfFrame& frame) {
    return {frame.known_half(), frame.unknown_half()};
}

GramErrors gram_errors(const EtfFrame& frame) {
    const Mat& w = frame.basis();
    const std::size_t k = w.rows;
    const double target_off = -1.0 / static_cast<double>(k - 1);
    GramErrors err;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i; j < k; ++j) {
            const double g = dot(w.row(i), w.row(j));
            if (i == j)
                err.max_diag_err = std::max(err.max_diag_err, std::abs(g - 1.0));
            else
                err.max_offdiag_err = std::max(err.max_offdiag_err, std::abs(g - target_off));
        }
    return err;
}

}  // namespace owd
