#pragma once

#include <cstdint>
#include <vector>

#include "owd/geometry.hpp"
#include "owd/linalg.hpp"

namespace owd {

/// Training status of one proposal; assigned by the matcher before any loss
/// is evaluated. class_id is meaningful only for GtMatched.
struct MatchStatus {
    enum class Kind : std::uint8_t { GtMatched, PseudoUnknown, Background };
    Kind kind = Kind::Background;
    int class_id = -1;

    static MatchStatus gt_matched(int class_id) { return {Kind::GtMatched, class_id}; }
    static MatchStatus pseudo_unknown() { return {Kind::PseudoUnknown, -1}; }
    static MatchStatus background() { return {Kind::Background, -1}; }

    bool is_gt() const { return kind == Kind::GtMatched; }
    bool is_pseudo() const { return kind == Kind::PseudoUnknown; }
    bool is_background() const { return kind == Kind::Background; }
};

/// One image's worth of proposals, as parallel arrays. gt_boxes entries are
/// meaningful only where status is GtMatched; from_prev marks proposals whose
/// scene originates from a task before the one being trained (replay data).
struct ProposalBatch {
    std::vector<Vec> raw;
    std::vector<Box> boxes;
    std::vector<MatchStatus> status;
    std::vector<Box> gt_boxes;
    std::vector<std::uint8_t> from_prev;

    std::size_t size() const { return raw.size(); }

    void add(Vec observation, const Box& box) {
        raw.push_back(std::move(observation));
        boxes.push_back(box);
        status.push_back(MatchStatus::background());
        gt_boxes.push_back(Box{});
        from_prev.push_back(0);
    }
};

}  // namespace owd
