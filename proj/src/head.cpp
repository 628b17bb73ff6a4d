#include "owd/head.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "owd/energy.hpp"
#include "owd/rng.hpp"

namespace owd {

namespace {
constexpr double kProbClamp = 1e-7;
constexpr double kDegenerateStd = 1e-8;

void fill_gaussian(Mat& m, Rng& rng, double scale) {
    for (double& v : m.data) v = scale * rng.normal();
}
}  // namespace

HeadParams make_head(std::size_t input_dim, std::size_t feature_dim, std::size_t classes,
                     std::uint64_t seed) {
    if (classes == 0) throw std::invalid_argument("make_head: need at least one class");
    Rng rng(seed);
    HeadParams p;
    p.feat_w = Mat(feature_dim, input_dim);
    fill_gaussian(p.feat_w, rng, 1.0 / std::sqrt(static_cast<double>(input_dim)));
    p.feat_b = Vec(feature_dim, 0.0);
    p.cls_w = Mat(classes + 1, feature_dim);
    fill_gaussian(p.cls_w, rng, 1e-3);
    p.cls_b = Vec(classes + 1, 0.0);
    p.obj_w = 1e-3 * rng.normal();
    p.obj_b = 0.0;
    p.box_w = Mat(4, feature_dim);
    fill_gaussian(p.box_w, rng, 1e-3);
    p.box_b = Vec(4, 0.0);
    p.prev_class_count = 0;
    return p;
}

void grow_classifier(HeadParams& params, std::size_t new_classes, std::uint64_t seed) {
    const std::size_t old_c = params.known_classes();
    const std::size_t d = params.feature_dim();
    Rng rng(seed);

    Mat w(old_c + new_classes + 1, d);
    Vec b(old_c + new_classes + 1, 0.0);
    for (std::size_t i = 0; i < old_c; ++i) {
        for (std::size_t j = 0; j < d; ++j) w(i, j) = params.cls_w(i, j);
        b[i] = params.cls_b[i];
    }
    for (std::size_t i = 0; i < new_classes; ++i)
        for (std::size_t j = 0; j < d; ++j) w(old_c + i, j) = 1e-3 * rng.normal();
    // unknown node keeps its learned row, stays last
    for (std::size_t j = 0; j < d; ++j) w(old_c + new_classes, j) = params.cls_w(old_c, j);
    b[old_c + new_classes] = params.cls_b[old_c];

    params.cls_w = std::move(w);
    params.cls_b = std::move(b);
    params.prev_class_count = old_c;
}

HeadOutputs forward(const HeadParams& params, std::span<const double> raw) {
    check_dims(raw.size() == params.input_dim(), "forward: raw dimension mismatch");
    HeadOutputs out;
    out.f = matvec(params.feat_w, raw);
    axpy(out.f, params.feat_b, 1.0);
    out.f_norm = norm(out.f);
    out.unit_f = Vec(out.f.size(), 0.0);
    if (out.f_norm > 0.0)
        for (std::size_t i = 0; i < out.f.size(); ++i) out.unit_f[i] = out.f[i] / out.f_norm;
    out.z_obj = params.obj_w * out.f_norm + params.obj_b;
    out.z_cls = matvec(params.cls_w, out.unit_f);
    axpy(out.z_cls, params.cls_b, 1.0);
    out.z_bbox = matvec(params.box_w, out.f);
    axpy(out.z_bbox, params.box_b, 1.0);
    return out;
}

Vec joint_logits(std::span<const double> z_cls, double z_obj) {
    const double denom = logsumexp(z_cls);
    const double obj = 1.0 / (1.0 + std::exp(-z_obj));
    Vec out(z_cls.size(), 0.0);
    for (std::size_t i = 0; i < z_cls.size(); ++i) {
        double p = std::exp(z_cls[i] - denom) * obj;
        p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
        out[i] = std::log(p / (1.0 - p));
    }
    return out;
}

double unknown_logit(std::span<const double> z_cls_known) {
    if (z_cls_known.empty()) throw std::invalid_argument("unknown_logit: empty known slice");
    return logsumexp(z_cls_known);
}

Vec calibrate_unknown(const Vec& z_u, const Vec& offsets) {
    check_dims(z_u.size() == offsets.size() && !z_u.empty(),
               "calibrate_unknown: per-image vectors must match and be non-empty");
    const double n = static_cast<double>(offsets.size());

    double mean_off = 0.0, mean_zu = 0.0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        mean_off += offsets[i];
        mean_zu += z_u[i];
    }
    mean_off /= n;
    mean_zu /= n;

    double var_off = 0.0, var_zu = 0.0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        var_off += (offsets[i] - mean_off) * (offsets[i] - mean_off);
        var_zu += (z_u[i] - mean_zu) * (z_u[i] - mean_zu);
    }
    const double std_off = std::sqrt(var_off / n);
    const double std_zu = std::sqrt(var_zu / n);

    if (std_off < kDegenerateStd || std_zu < kDegenerateStd) return z_u;

    Vec out(z_u.size());
    for (std::size_t i = 0; i < z_u.size(); ++i)
        out[i] = z_u[i] + std_zu * (offsets[i] - mean_off) / std_off;
    return out;
}

}  // namespace owd
