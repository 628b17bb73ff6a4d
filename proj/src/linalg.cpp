#include "owd/linalg.hpp"

#include <cmath>

namespace owd {

double dot(std::span<const double> a, std::span<const double> b) {
    check_dims(a.size() == b.size(), "dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Vec matvec(const Mat& m, std::span<const double> x) {
    check_dims(x.size() == m.cols, "matvec: dimension mismatch");
    Vec y(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.data.data() + i * m.cols;
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

Vec matvec_transposed(const Mat& m, std::span<const double> x) {
    check_dims(x.size() == m.rows, "matvec_transposed: dimension mismatch");
    Vec y(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.data.data() + i * m.cols;
        const double xi = x[i];
        if (xi == 0.0) continue;
        for (std::size_t j = 0; j < m.cols; ++j) y[j] += xi * row[j];
    }
    return y;
}

void add_outer(Mat& acc, std::span<const double> a, std::span<const double> b, double s) {
    check_dims(acc.rows == a.size() && acc.cols == b.size(), "add_outer: shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) {
        double* row = acc.data.data() + i * acc.cols;
        const double sa = s * a[i];
        if (sa == 0.0) continue;
        for (std::size_t j = 0; j < b.size(); ++j) row[j] += sa * b[j];
    }
}

void axpy(Vec& a, std::span<const double> b, double s) {
    check_dims(a.size() == b.size(), "axpy: length mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

}  // namespace owd
