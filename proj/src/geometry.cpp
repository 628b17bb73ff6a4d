#include "owd/geometry.hpp"

#include <algorithm>

namespace owd {

double box_area(const Box& b) {
    return std::max(0.0, b.x2 - b.x1) * std::max(0.0, b.y2 - b.y1);
}

double intersection_area(const Box& a, const Box& b) {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    return iw * ih;
}

double iou(const Box& a, const Box& b) {
    const double inter = intersection_area(a, b);
    const double uni = box_area(a) + box_area(b) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double giou(const Box& a, const Box& b) {
    const double inter = intersection_area(a, b);
    const double uni = box_area(a) + box_area(b) - inter;
    const Box hull{std::min(a.x1, b.x1), std::min(a.y1, b.y1),
                   std::max(a.x2, b.x2), std::max(a.y2, b.y2)};
    const double hull_area = box_area(hull);
    const double iou_term = uni > 0.0 ? inter / uni : 0.0;
    if (hull_area <= 0.0) return iou_term;
    return iou_term - (hull_area - uni) / hull_area;
}

}  // namespace owd
