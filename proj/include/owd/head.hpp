#pragma once

#include <cstdint>
#include <span>

#include "owd/linalg.hpp"

namespace owd {

/// Learnable parameters of the toy detector head. The classifier has C known
/// class rows (tasks in order) followed by one unknown-node row; rows
/// [0, prev_class_count) form the previous-task sub-classifier, rows
/// [prev_class_count, C) the current-task one.
struct HeadParams {
    Mat feat_w;   // d x d_in
    Vec feat_b;   // d
    Mat cls_w;    // (C+1) x d
    Vec cls_b;    // C+1
    double obj_w = 0.0;
    double obj_b = 0.0;
    Mat box_w;    // 4 x d
    Vec box_b;    // 4
    std::size_t prev_class_count = 0;

    std::size_t input_dim() const { return feat_w.cols; }
    std::size_t feature_dim() const { return feat_w.rows; }
    std::size_t known_classes() const { return cls_w.rows - 1; }
    std::size_t unknown_node() const { return cls_w.rows - 1; }
};

/// Per-proposal branch outputs. unit_f is f/||f|| (zero vector when ||f|| = 0).
struct HeadOutputs {
    Vec f;
    double f_norm = 0.0;
    Vec unit_f;
    double z_obj = 0.0;
    Vec z_cls;
    Vec z_bbox;
};

/// Seeded initialization: feature map ~ N(0, 1/d_in), class/box rows small.
HeadParams make_head(std::size_t input_dim, std::size_t feature_dim, std::size_t classes,
                     std::uint64_t seed);

/// Appends new class rows ahead of the unknown node and moves the
/// previous/current boundary to the old class count.
void grow_classifier(HeadParams& params, std::size_t new_classes, std::uint64_t seed);

HeadOutputs forward(const HeadParams& params, std::span<const double> raw);

/// Joint probabilities softmax(z_cls) * sigmoid(z_obj), clamped to
/// [1e-7, 1-1e-7] and converted back to logits.
Vec joint_logits(std::span<const double> z_cls, double z_obj);

/// logsumexp over the known-class logits (the unknown node excluded).
double unknown_logit(std::span<const double> z_cls_known);

/// Per-image calibration: standardize the offsets across the image's
/// proposals and rescale by std(z_u). Degenerate spreads (< 1e-8) leave the
/// logits untouched.
Vec calibrate_unknown(const Vec& z_u, const Vec& offsets);

}  // namespace owd
