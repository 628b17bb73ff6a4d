#pragma once

#include <span>

#include "owd/batch.hpp"
#include "owd/energy.hpp"
#include "owd/etf.hpp"
#include "owd/geometry.hpp"
#include "owd/head.hpp"

namespace owd {

/// Per-term weights and shared loss hyperparameters. Defaults match the
/// training recipe this library ships with.
struct LossWeights {
    double cls = 2.0;
    double l1 = 5.0;
    double giou = 2.0;
    double separation = 1.0;   // margin + subspace focal pair
    double distinction = 1.0;  // previous/current head preference, replay only
    double margin = 0.5;
    double alpha = 0.25;
    double gamma = 2.0;
};

/// Sigmoid focal loss summed over entries. targets must be 0/1.
/// If dlogits is non-null it receives d loss / d logits.
double sigmoid_focal_loss(std::span<const double> logits, std::span<const int> targets,
                          double alpha, double gamma, Vec* dlogits = nullptr);

/// Squared hinge on the unknown offset, batch mean. GT-matched proposals are
/// pushed to offset <= -m, pseudo-unknowns to offset >= m, background free.
double energy_margin_loss(std::span<const double> offsets, std::span<const MatchStatus> statuses,
                          double margin, Vec* doffsets = nullptr);

/// Focal loss on the (s_known, s_unknown) pair with targets [1,0] / [0,1] /
/// [0,0] by status, batch mean. dscores holds d/d s_known, d/d s_unknown.
double subspace_focal_loss(std::span<const SubspaceScores> scores,
                           std::span<const MatchStatus> statuses, double alpha, double gamma,
                           std::vector<SubspaceScores>* dscores = nullptr);

/// Sum of the margin and subspace focal terms.
double separation_loss(std::span<const SubspaceScores> scores,
                       std::span<const MatchStatus> statuses, double margin, double alpha,
                       double gamma);

/// Pairwise head-preference loss: proposals from previous tasks should score
/// higher on the previous-classes sub-head than the current one, and vice
/// versa. Mean per side; empty sides contribute 0. dprev/dcurr, when given,
/// receive d loss / d feature for each proposal.
double distinction_loss(std::span<const Vec> prev_features, std::span<const Vec> curr_features,
                        const HeadParams& params, std::vector<Vec>* dprev = nullptr,
                        std::vector<Vec>* dcurr = nullptr);

/// Sum of absolute corner differences. Rejects degenerate gt boxes.
double l1_box_loss(const Box& pred, const Box& gt, double dpred[4] = nullptr);

/// 1 - giou(pred, gt), with analytic gradient in the pred corners.
double giou_loss(const Box& pred, const Box& gt, double dpred[4] = nullptr);

/// Gradient bundle mirroring HeadParams.
struct Gradients {
    Mat feat_w;
    Vec feat_b;
    Mat cls_w;
    Vec cls_b;
    double obj_w = 0.0;
    double obj_b = 0.0;
    Mat box_w;
    Vec box_b;

    static Gradients zeros_like(const HeadParams& p);
};

struct LossBreakdown {
    double cls = 0.0;
    double l1 = 0.0;
    double giou = 0.0;
    double energy_margin = 0.0;
    double subspace_focal = 0.0;
    double distinction = 0.0;
    double total = 0.0;
};

/// Full weighted objective over one batch, with gradients for every learnable
/// parameter. The distinction term participates only when replay_active.
LossBreakdown total_loss(const ProposalBatch& batch, const EtfFrame& frame,
                         const HeadParams& params, const LossWeights& weights, bool replay_active,
                         Gradients* grads = nullptr);

}  // namespace owd
