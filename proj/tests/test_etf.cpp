#include <doctest.h>

#include "owd/etf.hpp"

using namespace owd;

TEST_CASE("orthonormal rows satisfy Q Q^T = I") {
    const Mat q = build_orthonormal_rows(7, 4, 8);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            const double expect = i == j ? 1.0 : 0.0;
            CHECK(std::abs(dot(q.row(i), q.row(j)) - expect) < 1e-10);
        }
}

TEST_CASE("orthonormal rows: K=1, d=1 gives a unit entry") {
    const Mat q = build_orthonormal_rows(0, 1, 1);
    CHECK(std::abs(std::abs(q(0, 0)) - 1.0) < 1e-12);
}

TEST_CASE("orthonormal rows are deterministic per seed") {
    const Mat a = build_orthonormal_rows(7, 4, 8);
    const Mat b = build_orthonormal_rows(7, 4, 8);
    CHECK(a == b);
    const Mat c = build_orthonormal_rows(8, 4, 8);
    CHECK(a.data != c.data);
}

TEST_CASE("orthonormal rows reject impossible shapes") {
    CHECK_THROWS_AS(build_orthonormal_rows(0, 0, 4), std::invalid_argument);
    CHECK_THROWS_AS(build_orthonormal_rows(0, 5, 4), std::invalid_argument);
}

TEST_CASE("simplex frame Gram matrix") {
    for (const std::size_t k : {2ul, 4ul, 32ul, 64ul, 128ul}) {
        for (const std::size_t d : {k, 2 * k}) {
            const EtfFrame frame = build_simplex_etf(k, d, 3);
            const GramErrors err = gram_errors(frame);
            CAPTURE(k);
            CAPTURE(d);
            CHECK(err.max_diag_err < 1e-9);
            CHECK(err.max_offdiag_err < 1e-9);
        }
    }
}

TEST_CASE("K=2 gives antipodal unit vectors") {
    const EtfFrame frame = build_simplex_etf(2, 2, 11);
    CHECK(std::abs(dot(frame.basis().row(0), frame.basis().row(1)) + 1.0) < 1e-9);
}

TEST_CASE("K=128 off-diagonal is -1/127") {
    const EtfFrame frame = build_simplex_etf(128, 128, 5);
    const double g = dot(frame.basis().row(3), frame.basis().row(77));
    CHECK(std::abs(g + 1.0 / 127.0) < 1e-9);
}

TEST_CASE("frame construction rejects odd K and d < K") {
    CHECK_THROWS_AS(build_simplex_etf(5, 8, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_simplex_etf(8, 4, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_simplex_etf(0, 4, 0), std::invalid_argument);
}

TEST_CASE("subspace split partitions the basis") {
    const EtfFrame frame = build_simplex_etf(4, 8, 9);
    const auto [known, unknown] = split_subspaces(frame);
    CHECK(known.rows == 2);
    CHECK(unknown.rows == 2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(known(i, j) == frame.basis()(i, j));
            CHECK(unknown(i, j) == frame.basis()(i + 2, j));
        }

    const EtfFrame big = build_simplex_etf(128, 256, 9);
    CHECK(big.known_half().rows == 64);
    CHECK(big.unknown_half().rows == 64);
}

TEST_CASE("cross-subspace rows stay equiangular") {
    const EtfFrame frame = build_simplex_etf(32, 64, 21);
    const double target = -1.0 / 31.0;
    for (std::size_t i = 0; i < frame.known_half().rows; ++i)
        for (std::size_t j = 0; j < frame.unknown_half().rows; ++j)
            CHECK(std::abs(dot(frame.known_half().row(i), frame.unknown_half().row(j)) - target) <
                  1e-9);
}

TEST_CASE("frame is a pure function of (K, d, seed)") {
    const EtfFrame a = build_simplex_etf(16, 32, 42);
    const EtfFrame b = build_simplex_etf(16, 32, 42);
    CHECK(a.basis() == b.basis());
}
