#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "owd/batch.hpp"
#include "owd/geometry.hpp"

namespace owd {

/// Pseudo-unknown selection knobs. size_ratio follows the published recipe
/// literally (minimum box side at least half the smaller image side) even
/// though that is aggressive; it is configurable for exactly that reason.
struct PseudoConfig {
    int tau = 20;
    double size_ratio = 0.5;
    double logit_floor = 0.0;
    double iou_match_threshold = 0.5;
};

struct GtInstance {
    int class_id = -1;
    Box box;
};

/// Greedy one-to-one IoU matching, descending IoU, pairs below threshold left
/// unmatched. Returns one status per proposal (Background when unmatched) and
/// writes the matched gt box per GT-matched proposal into gt_boxes.
std::vector<MatchStatus> match_gt(std::span<const Box> proposals, std::span<const GtInstance> gt,
                                  double threshold, std::vector<Box>* gt_boxes = nullptr);

/// floor(k_gt * max(1, 2 tau / N_known)).
int pseudo_count(int k_gt, int n_known, int tau);

/// Promotes top background proposals to PseudoUnknown in place: must pass the
/// size filter and have calibrated logit above the floor; ranked by calibrated
/// logit descending (ties to the lower index), capped at pseudo_count.
void select_pseudo_unknowns(std::vector<MatchStatus>& statuses, std::span<const Box> proposals,
                            std::span<const double> calibrated_logits, int k_gt, int n_known,
                            const PseudoConfig& config,
                            std::pair<double, double> image_extent = {1.0, 1.0});

}  // namespace owd
