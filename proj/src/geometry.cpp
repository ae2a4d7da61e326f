#include "bpj/geometry.hpp"

namespace bpj {

namespace {
constexpr double kCiouEps = 1e-7;  // guards divisions in the CIoU penalties
}

double intersection_area(const Box& a, const Box& b) {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) {
        return 0.0;
    }
    return iw * ih;
}

double iou(const Box& a, const Box& b) {
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) {
        return 0.0;
    }
    return inter / uni;
}

double inner_iou(const Box& body, const Box& part) {
    const double part_area = part.area();
    if (part_area <= 0.0) {
        return 0.0;  // degenerate part; callers treat this as "gate fails"
    }
    return intersection_area(body, part) / part_area;
}

double ciou(const Box& a, const Box& b) {
    if (a.width() <= 0.0 || a.height() <= 0.0 || b.width() <= 0.0 || b.height() <= 0.0) {
        throw DataError("ciou: degenerate box (zero width or height)");
    }
    const double overlap = iou(a, b);

    // Squared distance between centers over squared diagonal of the smallest
    // enclosing box.
    const double dx = a.cx() - b.cx();
    const double dy = a.cy() - b.cy();
    const double enclose_w = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
    const double enclose_h = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
    const double diag2 = enclose_w * enclose_w + enclose_h * enclose_h + kCiouEps;
    const double center_penalty = (dx * dx + dy * dy) / diag2;

    // Aspect-ratio consistency term.
    constexpr double kFourOverPi2 = 4.0 / (3.14159265358979323846 * 3.14159265358979323846);
    const double angle = std::atan(b.width() / b.height()) - std::atan(a.width() / a.height());
    const double v = kFourOverPi2 * angle * angle;
    const double alpha = v / ((1.0 - overlap) + v + kCiouEps);

    return overlap - center_penalty - alpha * v;
}

}  // namespace bpj
