#pragma once

#include <span>

#include "owd/etf.hpp"
#include "owd/linalg.hpp"

namespace owd {

/// Scores of a feature against the two frame halves. The unknown offset is
/// always derived from the pair, never stored separately.
struct SubspaceScores {
    double s_known = 0.0;
    double s_unknown = 0.0;
    double offset() const { return s_unknown - s_known; }
};

/// log sum exp(v_i) with max shift; finite for any finite input. Rejects empty.
double logsumexp(std::span<const double> values);

/// Helmholtz free energy of f against one subspace: -logsumexp of the row
/// projections. All energies use the raw (unnormalized) feature.
double subspace_energy(const Mat& sub_basis, std::span<const double> f);

/// Negated energies of both halves.
SubspaceScores score_subspaces(const EtfFrame& frame, std::span<const double> f);

/// Sub-classifier affinity: logsumexp over one head's logit slice.
double head_score(std::span<const double> logits);

/// softmax of the row projections of f; the gradient of a subspace score
/// (d/d f of logsumexp(B f)) is softmax(B f)^T B.
Vec projection_softmax(const Mat& sub_basis, std::span<const double> f);

/// d score / d f = softmax(B f)^T B, accumulated into grad with weight s.
void add_score_gradient(const Mat& sub_basis, std::span<const double> f, double s, Vec& grad);

}  // namespace owd
