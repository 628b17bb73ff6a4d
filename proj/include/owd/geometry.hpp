#pragma once

namespace owd {

/// Axis-aligned box, corner form. Coordinates normalized to [0,1] in the
/// simulator, but nothing here assumes that.
struct Box {
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    bool valid() const { return x1 < x2 && y1 < y2; }
    bool operator==(const Box&) const = default;
};

/// Clamped area: degenerate (inverted) boxes count as zero.
double box_area(const Box& b);
double intersection_area(const Box& a, const Box& b);

/// Intersection over union in [0,1]; empty union yields 0.
double iou(const Box& a, const Box& b);

/// Generalized IoU in (-1, 1]: IoU minus the hull's empty fraction.
double giou(const Box& a, const Box& b);

}  // namespace owd
