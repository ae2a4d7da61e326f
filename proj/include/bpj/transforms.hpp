#pragma once

#include <array>
#include <optional>
#include <vector>

#include "bpj/geometry.hpp"
#include "bpj/grid_spec.hpp"

namespace bpj {

/// Kind marker for ExtendedObject: kBodyKind for the body class, otherwise
/// the part slot index in [0, k).
inline constexpr int kBodyKind = -1;

/// One offset pair (a predicted or target part/body center displacement).
/// `set` distinguishes a real value from an unused slot; targets never carry
/// silent zeros for invisible slots.
struct Offset {
    double x = 0.0;
    double y = 0.0;
    bool set = false;
};

/// A decoded (or to-be-encoded) per-cell prediction: box, scores and the k
/// center-offset channels, plus the optional 2x4 contact-state probabilities.
///
/// Coordinate conventions by stage:
///  - cell frame (output of encode/decode round-trips): box center lies in
///    [-0.5, 1.5] around the cell origin, w/h in grid units; offsets are
///    displacements from the cell origin, bounded by +-2*B/s per axis.
///  - grid frame (decode_cell output): box center has the cell origin added;
///    offsets are still cell-origin displacements.
///  - pixel frame (after rescale): box in pixels; offsets hold the absolute
///    predicted center points (stride * (offset + cell origin)).
struct ExtendedObject {
    int kind = kBodyKind;
    Box box;
    double objectness = 1.0;  // ignored for anchor_free
    std::vector<double> class_scores;
    std::vector<Offset> offsets;
    std::optional<std::array<std::array<double, 4>, 2>> contact;
    bool degenerate = false;  // anchor-free negative side distances were clamped

    /// Detection confidence: objectness * class score for anchor-based
    /// variants, plain class score for anchor_free. `class_index` 0 is the
    /// body class, slot j maps to class j+1.
    double confidence(int class_index, bool has_objectness) const {
        const double c = class_scores[class_index];
        return has_objectness ? objectness * c : c;
    }
};

/// Decodes one anchor-based prediction vector into the grid frame.
///
/// Box: center = 2*sigmoid(raw)-0.5 plus the cell origin, size =
/// (2*sigmoid(raw))^2 * B/s. Offsets: (4*sigmoid(raw)-2) * B/s, displacements
/// from the cell origin. Objectness/class/contact channels pass through the
/// sigmoid. Throws DataError on non-finite raw input, identifying the cell.
ExtendedObject decode_cell(const float* raw, const GridSpec& spec, const ChannelLayout& layout,
                           int stride, int anchor_index, int cell_x, int cell_y);

/// Decodes one anchor-free prediction vector at grid location p. Raw box
/// channels are side distances (l,t,r,b) taken as-is; negative sides are
/// clamped to 0 and flagged degenerate. Offsets use the anchor-based bounded
/// transform with unit scale (range +-2 grid units).
ExtendedObject decode_cell_free(const float* raw, const GridSpec& spec,
                                const ChannelLayout& layout, int stride, double px, double py);

/// Exact inverse of decode_cell for a cell-frame object (anchor-based
/// variants); probabilities are clamped to [1e-6, 1-1e-6] before the inverse
/// sigmoid. Unset offsets encode as raw 0 (callers mask them separately).
///
/// Throws DataError naming the field when a value sits outside the decodable
/// range: center outside [-0.5, 1.5], size outside (0, 4*B/s), offset
/// magnitude >= 2*B/s.
std::vector<double> encode_targets(const ExtendedObject& obj, const GridSpec& spec,
                                   const ChannelLayout& layout, int stride, int anchor_index);

/// Anchor-free counterpart of encode_targets: the box is given in grid units
/// and converted to side distances from location p (raw channels hold the
/// distances directly). Throws DataError if p lies outside the box (negative
/// side distance) or an offset magnitude is >= 2 grid units.
std::vector<double> encode_targets_free(const ExtendedObject& obj, const GridSpec& spec,
                                        const ChannelLayout& layout, double px, double py);

/// Bound of the decoded offset channels, in grid units per axis.
inline double offset_bound(const GridSpec& spec, int stride, int anchor_index, bool x_axis) {
    if (spec.variant == Variant::anchor_free) {
        return 2.0;
    }
    const auto& a = spec.anchors[spec.stride_index(stride)][anchor_index];
    return 2.0 * (x_axis ? a.w : a.h) / stride;
}

}  // namespace bpj
