#pragma once

#include <algorithm>
#include <cmath>

#include "bpj/common.hpp"

namespace bpj {

/// Axis-aligned rectangle in pixel (or grid-unit) coordinates, corner form.
/// Corner form is what NMS, association and the metrics consume; the grid
/// transforms work in center form, provided as pure conversions below.
struct Box {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }

    bool valid() const { return x1 <= x2 && y1 <= y2; }

    static Box from_center(double cx, double cy, double w, double h) {
        return Box{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
    }

    bool operator==(const Box&) const = default;
};

/// Intersection area of two boxes (0 when disjoint).
double intersection_area(const Box& a, const Box& b);

/// Standard intersection-over-union. Degenerate (zero-area) operands give 0.
double iou(const Box& a, const Box& b);

/// Containment gate used by association decoding: intersection area divided
/// by the part's own area. 1.0 means the part lies fully inside the body.
/// A zero-area part is flagged degenerate and yields 0.
double inner_iou(const Box& body, const Box& part);

/// Complete IoU: IoU minus a normalized center-distance penalty minus an
/// aspect-ratio penalty weighted by v/((1-IoU)+v+eps). Equals 1 iff the boxes
/// coincide. Throws DataError on zero-width/height input because the aspect
/// term is undefined there.
double ciou(const Box& a, const Box& b);

}  // namespace bpj
