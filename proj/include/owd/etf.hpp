#pragma once

#include <cstdint>
#include <utility>

#include "owd/linalg.hpp"

namespace owd {

/// Fixed simplex equiangular tight frame: K unit rows in R^d with pairwise
/// inner products -1/(K-1), split into known/unknown halves. Non-learnable;
/// immutable after construction.
class EtfFrame {
public:
    static EtfFrame build(std::size_t num_vectors, std::size_t feature_dim, std::uint64_t seed);

    const Mat& basis() const { return basis_; }
    const Mat& known_half() const { return known_half_; }
    const Mat& unknown_half() const { return unknown_half_; }
    std::size_t num_vectors() const { return basis_.rows; }
    std::size_t feature_dim() const { return basis_.cols; }
    std::uint64_t seed() const { return seed_; }

private:
    EtfFrame() = default;
    Mat basis_;
    Mat known_half_;
    Mat unknown_half_;
    std::uint64_t seed_ = 0;
};

/// Rows of a seeded Gaussian matrix, orthonormalized (Q Q^T = I_K).
/// Deterministic for a given (seed, K, d). Rejects d < K and K = 0.
Mat build_orthonormal_rows(std::uint64_t seed, std::size_t num_rows, std::size_t dim);

/// Frame factory; rejects odd K, K < 2 and d < K.
EtfFrame build_simplex_etf(std::size_t num_vectors, std::size_t feature_dim, std::uint64_t seed);

/// The two (K/2) x d halves, known first. Rows partition the basis exactly.
std::pair<const Mat&, const Mat&> split_subspaces(const EtfFrame& frame);

struct GramErrors {
    double max_diag_err = 0.0;
    double max_offdiag_err = 0.0;
};

/// Max deviation of W W^T from the ideal simplex Gram matrix.
GramErrors gram_errors(const EtfFrame& frame);

}  // namespace owd
