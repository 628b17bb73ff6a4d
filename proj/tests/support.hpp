#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "owd/linalg.hpp"
#include "owd/rng.hpp"

namespace owd::testing {

/// Central finite differences of a scalar function of a flat vector.
inline Vec finite_difference(const std::function<double(const Vec&)>& f, const Vec& x,
                             double h = 1e-5) {
    Vec grad(x.size(), 0.0);
    Vec probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double fp = f(probe);
        probe[i] = x[i] - h;
        const double fm = f(probe);
        probe[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

/// Max relative error between two gradients, with a unit scale floor so that
/// near-zero components compare absolutely.
inline double max_rel_error(const Vec& a, const Vec& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

inline Vec random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
    Vec v(n);
    for (double& x : v) x = scale * rng.normal();
    return v;
}

}  // namespace owd::testing
