#pragma once

#include <string>
#include <vector>

#include "bpj/grid_spec.hpp"
#include "bpj/scene.hpp"
#include "bpj/transforms.hpp"

namespace bpj {

/// Knobs for ground-truth-to-grid assignment.
struct AssignConfig {
    /// Extra responsible cells besides the base cell: 0 (base only), 2 (the
    /// horizontal and vertical neighbours on the fractional-center side), or
    /// 4 (also consider the opposite-side neighbours; those are added only
    /// when the center remains representable from them, which happens exactly
    /// on the 0.5 fraction boundary).
    int neighbor_cells = 2;
    /// When false, offset targets are written at the base cell only and
    /// masked at neighbour cells.
    bool offsets_at_neighbors = true;
    /// Objects smaller than this (pixels, either dimension) are skipped with
    /// a warning record.
    double min_size = 2.0;
    /// Anchor match threshold: matched iff max(g/B, B/g) < ratio in both
    /// dimensions.
    double anchor_ratio_max = 4.0;
};

/// One (object, stride, anchor, cell) target written by assign().
struct MatchRecord {
    int body_index = 0;    // index into scene.bodies
    int kind = kBodyKind;  // kBodyKind or part slot index
    int stride = 0;
    int anchor = 0;  // always 0 for anchor_free
    int cell_x = 0;
    int cell_y = 0;
};

struct AssignStats {
    int collisions = 0;         // cells overwritten by a later object
    int dropped_offsets = 0;    // offset slots masked: outside the +-2B/s range
    int skipped_objects = 0;    // below min_size
    int unmatched_objects = 0;  // matched no anchor/stride at all
};

/// Target grids plus bookkeeping. Storage conventions inside the tensors:
///  - anchor-based: the objectness channel is a {0,1} matched indicator (0 at
///    unmatched cells); at matched cells box and offset channels hold raw
///    (encoder-space) values, class channels hold the {0,1} one-hot, contact
///    channels hold the annotated state in {0,1,2}. All non-objectness
///    channels are NaN wherever no target exists (unmatched cells, masked
///    offset slots, unannotated contact groups).
///  - anchor-free: no objectness channel; unmatched cells are all-NaN and a
///    cell is matched iff its first box channel is non-NaN.
struct AssignResult {
    std::vector<GridTensor> targets;  // one per stride, ascending order
    std::vector<MatchRecord> matches;
    std::vector<std::string> warnings;
    AssignStats stats;
};

/// True iff the ground-truth size fits the anchor within the ratio threshold
/// in both dimensions (strict inequality). Throws DataError on non-positive
/// dimensions.
bool anchor_match(double gt_w, double gt_h, const Anchor& anchor, double ratio_max = 4.0);

/// Whether a cell of a target tensor carries an object target.
bool cell_matched(const GridTensor& tensor, const ChannelLayout& layout, int anchor, int row,
                  int col);

/// Builds the per-stride target grids for one scene. Deterministic: identical
/// scene and spec produce bit-identical tensors. Objects are written in
/// annotation order, each body followed by its visible parts in slot order;
/// on collision the later write wins (counted in stats).
AssignResult assign(const Scene& scene, const GridSpec& spec, const AssignConfig& config = {});

}  // namespace bpj
