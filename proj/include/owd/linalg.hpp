#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace owd {

using Vec = std::vector<double>;

/// Dense row-major matrix. Small sizes only (K <= 128, d <= 256 in practice),
/// so everything is plain loops over contiguous storage.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    bool operator==(const Mat& other) const = default;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

/// y = M * x
Vec matvec(const Mat& m, std::span<const double> x);

/// y = M^T * x  (x has m.rows entries)
Vec matvec_transposed(const Mat& m, std::span<const double> x);

/// acc += s * (a outer b), acc is |a| x |b|
void add_outer(Mat& acc, std::span<const double> a, std::span<const double> b, double s = 1.0);

/// a += s * b
void axpy(Vec& a, std::span<const double> b, double s);

inline void check_dims(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace owd
