#include "owd/matching.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace owd {

std::vector<MatchStatus> match_gt(std::span<const Box> proposals, std::span<const GtInstance> gt,
                                  double threshold, std::vector<Box>* gt_boxes) {
    std::vector<MatchStatus> statuses(proposals.size(), MatchStatus::background());
    if (gt_boxes) gt_boxes->assign(proposals.size(), Box{});

    struct Pair {
        double iou;
        std::size_t prop;
        std::size_t gt;
    };
    std::vector<Pair> pairs;
    pairs.reserve(proposals.size() * gt.size());
    for (std::size_t p = 0; p < proposals.size(); ++p)
        for (std::size_t g = 0; g < gt.size(); ++g) {
            const double v = iou(proposals[p], gt[g].box);
            if (v >= threshold) pairs.push_back({v, p, g});
        }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.prop != b.prop) return a.prop < b.prop;
        return a.gt < b.gt;
    });

    std::vector<bool> prop_used(proposals.size(), false);
    std::vector<bool> gt_used(gt.size(), false);
    for (const Pair& pr : pairs) {
        if (prop_used[pr.prop] || gt_used[pr.gt]) continue;
        prop_used[pr.prop] = true;
        gt_used[pr.gt] = true;
        statuses[pr.prop] = MatchStatus::gt_matched(gt[pr.gt].class_id);
        if (gt_boxes) (*gt_boxes)[pr.prop] = gt[pr.gt].box;
    }
    return statuses;
}

int pseudo_count(int k_gt, int n_known, int tau) {
    if (n_known < 1) throw std::invalid_argument("pseudo_count: N_known must be positive");
    if (k_gt <= 0) return 0;
    const double ratio = std::max(1.0, 2.0 * static_cast<double>(tau) / static_cast<double>(n_known));
    return static_cast<int>(std::floor(static_cast<double>(k_gt) * ratio));
}

void select_pseudo_unknowns(std::vector<MatchStatus>& statuses, std::span<const Box> proposals,
                            std::span<const double> calibrated_logits, int k_gt, int n_known,
                            const PseudoConfig& config, std::pair<double, double> image_extent) {
    if (statuses.size() != proposals.size() || statuses.size() != calibrated_logits.size())
        throw std::invalid_argument("select_pseudo_unknowns: length mismatch");

    const int budget = pseudo_count(k_gt, n_known, config.tau);
    if (budget <= 0) return;

    const double min_side =
        config.size_ratio * std::min(image_extent.first, image_extent.second);

    std::vector<std::size_t> survivors;
    for (std::size_t i = 0; i < statuses.size(); ++i) {
        if (!statuses[i].is_background()) continue;
        const Box& b = proposals[i];
        if (std::min(b.width(), b.height()) < min_side) continue;
        if (!(calibrated_logits[i] > config.logit_floor)) continue;
        survivors.push_back(i);
    }
    std::sort(survivors.begin(), survivors.end(), [&](std::size_t a, std::size_t b) {
        if (calibrated_logits[a] != calibrated_logits[b])
            return calibrated_logits[a] > calibrated_logits[b];
        return a < b;
    });

    const std::size_t take = std::min<std::size_t>(survivors.size(), static_cast<std::size_t>(budget));
    for (std::size_t r = 0; r < take; ++r) statuses[survivors[r]] = MatchStatus::pseudo_unknown();
}

}  // namespace owd
