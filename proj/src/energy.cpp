#include "owd/energy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace owd {

double logsumexp(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("logsumexp: empty input");
    const double mx = *std::max_element(values.begin(), values.end());
    double acc = 0.0;
    for (double v : values) acc += std::exp(v - mx);
    return mx + std::log(acc);
}

double subspace_energy(const Mat& sub_basis, std::span<const double> f) {
    const Vec proj = matvec(sub_basis, f);
    return -logsumexp(proj);
}

SubspaceScores score_subspaces(const EtfFrame& frame, std::span<const double> f) {
    check_dims(f.size() == frame.feature_dim(), "score_subspaces: feature dimension mismatch");
    return {-subspace_energy(frame.known_half(), f), -subspace_energy(frame.unknown_half(), f)};
}

double head_score(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("head_score: empty logit slice");
    return logsumexp(logits);
}

Vec projection_softmax(const Mat& sub_basis, std::span<const double> f) {
    Vec proj = matvec(sub_basis, f);
    const double mx = *std::max_element(proj.begin(), proj.end());
    double acc = 0.0;
    for (double& p : proj) {
        p = std::exp(p - mx);
        acc += p;
    }
    for (double& p : proj) p /= acc;
    return proj;
}

void add_score_gradient(const Mat& sub_basis, std::span<const double> f, double s, Vec& grad) {
    check_dims(grad.size() == sub_basis.cols, "add_score_gradient: gradient size mismatch");
    const Vec w = projection_softmax(sub_basis, f);
    for (std::size_t i = 0; i < sub_basis.rows; ++i) {
        const double wi = s * w[i];
        const double* row = sub_basis.data.data() + i * sub_basis.cols;
        for (std::size_t j = 0; j < sub_basis.cols; ++j) grad[j] += wi * row[j];
    }
}

}  // namespace owd
