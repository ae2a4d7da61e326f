#include "bpj/transforms.hpp"

#include <cmath>
#include <string>

namespace bpj {

namespace {

void check_finite(const float* raw, int count, int stride, int anchor_index, int cell_x,
                  int cell_y) {
    for (int c = 0; c < count; ++c) {
        if (!std::isfinite(raw[c])) {
            throw DataError("decode: non-finite raw value in channel " + std::to_string(c) +
                            " at stride " + std::to_string(stride) + " anchor " +
                            std::to_string(anchor_index) + " cell (" + std::to_string(cell_x) +
                            "," + std::to_string(cell_y) + ")");
        }
    }
}

void decode_shared(const float* raw, const GridSpec& spec, const ChannelLayout& layout,
                   double off_scale_x, double off_scale_y, ExtendedObject& obj) {
    const int k = spec.part_count;
    obj.class_scores.resize(k + 1);
    for (int c = 0; c <= k; ++c) {
        obj.class_scores[c] = sigmoid(raw[layout.cls_channel(c)]);
    }
    obj.offsets.resize(k);
    for (int j = 0; j < k; ++j) {
        obj.offsets[j].x = (4.0 * sigmoid(raw[layout.offset_x(j)]) - 2.0) * off_scale_x;
        obj.offsets[j].y = (4.0 * sigmoid(raw[layout.offset_y(j)]) - 2.0) * off_scale_y;
        obj.offsets[j].set = true;
    }
    if (spec.has_contact()) {
        std::array<std::array<double, 4>, 2> contact;
        for (int g = 0; g < 2; ++g) {
            for (int s = 0; s < 4; ++s) {
                contact[g][s] = sigmoid(raw[layout.contact_channel(g, s)]);
            }
        }
        obj.contact = contact;
    }
}

}  // namespace

ExtendedObject decode_cell(const float* raw, const GridSpec& spec, const ChannelLayout& layout,
                           int stride, int anchor_index, int cell_x, int cell_y) {
    check_finite(raw, layout.total, stride, anchor_index, cell_x, cell_y);
    const auto& anchor = spec.anchors[spec.stride_index(stride)][anchor_index];
    const double aw = anchor.w / stride;  // anchor dimensions in grid units
    const double ah = anchor.h / stride;

    ExtendedObject obj;
    obj.objectness = sigmoid(raw[layout.obj]);

    const double cx = 2.0 * sigmoid(raw[layout.box + 0]) - 0.5 + cell_x;
    const double cy = 2.0 * sigmoid(raw[layout.box + 1]) - 0.5 + cell_y;
    const double sw = 2.0 * sigmoid(raw[layout.box + 2]);
    const double sh = 2.0 * sigmoid(raw[layout.box + 3]);
    obj.box = Box::from_center(cx, cy, sw * sw * aw, sh * sh * ah);

    decode_shared(raw, spec, layout, aw, ah, obj);
    return obj;
}

ExtendedObject decode_cell_free(const float* raw, const GridSpec& spec,
                                const ChannelLayout& layout, int stride, double px, double py) {
    check_finite(raw, layout.total, stride, 0, static_cast<int>(px), static_cast<int>(py));

    ExtendedObject obj;
    double l = raw[layout.box + 0];
    double t = raw[layout.box + 1];
    double r = raw[layout.box + 2];
    double b = raw[layout.box + 3];
    if (l < 0.0 || t < 0.0 || r < 0.0 || b < 0.0) {
        obj.degenerate = true;
        l = std::max(0.0, l);
        t = std::max(0.0, t);
        r = std::max(0.0, r);
        b = std::max(0.0, b);
    }
    obj.box = Box{px - l, py - t, px + r, py + b};
    if (obj.box.area() <= 0.0) {
        obj.degenerate = true;
    }

    decode_shared(raw, spec, layout, 1.0, 1.0, obj);
    return obj;
}

namespace {

void encode_probabilities(const ExtendedObject& obj, const GridSpec& spec,
                          const ChannelLayout& layout, std::vector<double>& raw) {
    for (int c = 0; c <= spec.part_count; ++c) {
        raw[layout.cls_channel(c)] = clamped_logit(obj.class_scores[c]);
    }
    if (spec.has_contact() && obj.contact) {
        for (int g = 0; g < 2; ++g) {
            for (int s = 0; s < 4; ++s) {
                raw[layout.contact_channel(g, s)] = clamped_logit((*obj.contact)[g][s]);
            }
        }
    }
}

void encode_offset(const Offset& offset, int slot, double bound_x, double bound_y,
                   const ChannelLayout& layout, std::vector<double>& raw) {
    if (std::abs(offset.x) >= bound_x || std::abs(offset.y) >= bound_y) {
        throw DataError("encode_targets: offset slot " + std::to_string(slot) + " (" +
                        std::to_string(offset.x) + "," + std::to_string(offset.y) +
                        ") outside +-" + std::to_string(bound_x) + " x +-" +
                        std::to_string(bound_y));
    }
    raw[layout.offset_x(slot)] = clamped_logit((offset.x / bound_x + 1.0) / 2.0);
    raw[layout.offset_y(slot)] = clamped_logit((offset.y / bound_y + 1.0) / 2.0);
}

}  // namespace

std::vector<double> encode_targets(const ExtendedObject& obj, const GridSpec& spec,
                                   const ChannelLayout& layout, int stride, int anchor_index) {
    if (spec.variant == Variant::anchor_free) {
        throw std::logic_error("encode_targets: use encode_targets_free for anchor_free specs");
    }
    std::vector<double> raw(layout.total, 0.0);
    const auto& anchor = spec.anchors[spec.stride_index(stride)][anchor_index];
    const double aw = anchor.w / stride;
    const double ah = anchor.h / stride;

    const double cx = obj.box.cx();
    const double cy = obj.box.cy();
    if (cx < -0.5 || cx > 1.5 || cy < -0.5 || cy > 1.5) {
        throw DataError("encode_targets: box center (" + std::to_string(cx) + "," +
                        std::to_string(cy) + ") outside the cell range [-0.5, 1.5]");
    }
    raw[layout.box + 0] = clamped_logit((cx + 0.5) / 2.0);
    raw[layout.box + 1] = clamped_logit((cy + 0.5) / 2.0);

    const double w = obj.box.width();
    const double h = obj.box.height();
    if (w <= 0.0 || w >= 4.0 * aw) {
        throw DataError("encode_targets: box width " + std::to_string(w) +
                        " outside (0, 4*B/s) = (0, " + std::to_string(4.0 * aw) + ")");
    }
    if (h <= 0.0 || h >= 4.0 * ah) {
        throw DataError("encode_targets: box height " + std::to_string(h) +
                        " outside (0, 4*B/s) = (0, " + std::to_string(4.0 * ah) + ")");
    }
    raw[layout.box + 2] = clamped_logit(0.5 * std::sqrt(w / aw));
    raw[layout.box + 3] = clamped_logit(0.5 * std::sqrt(h / ah));

    raw[layout.obj] = clamped_logit(obj.objectness);

    for (int j = 0; j < spec.part_count; ++j) {
        if (obj.offsets[j].set) {
            encode_offset(obj.offsets[j], j, 2.0 * aw, 2.0 * ah, layout, raw);
        }
    }
    encode_probabilities(obj, spec, layout, raw);
    return raw;
}

std::vector<double> encode_targets_free(const ExtendedObject& obj, const GridSpec& spec,
                                        const ChannelLayout& layout, double px, double py) {
    if (spec.variant != Variant::anchor_free) {
        throw std::logic_error("encode_targets_free: spec variant is not anchor_free");
    }
    std::vector<double> raw(layout.total, 0.0);
    const double l = px - obj.box.x1;
    const double t = py - obj.box.y1;
    const double r = obj.box.x2 - px;
    const double b = obj.box.y2 - py;
    if (l < 0.0 || t < 0.0 || r < 0.0 || b < 0.0) {
        throw DataError("encode_targets: location (" + std::to_string(px) + "," +
                        std::to_string(py) + ") outside the box (negative side distance)");
    }
    raw[layout.box + 0] = l;
    raw[layout.box + 1] = t;
    raw[layout.box + 2] = r;
    raw[layout.box + 3] = b;

    for (int j = 0; j < spec.part_count; ++j) {
        if (obj.offsets[j].set) {
            encode_offset(obj.offsets[j], j, 2.0, 2.0, layout, raw);
        }
    }
    encode_probabilities(obj, spec, layout, raw);
    return raw;
}

}  // namespace bpj
