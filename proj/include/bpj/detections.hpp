#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bpj/geometry.hpp"

namespace bpj {

/// A part detection bound to one slot of a body detection.
struct AssociatedPart {
    Box box;
    double score = 0.0;
    double cx = 0.0;  // part box center, the point association matched on
    double cy = 0.0;
    std::optional<std::array<double, 4>> contact_scores;
};

/// Final per-body output of association decoding: the body detection plus up
/// to k associated parts (slot j empty when no part survived the gates).
struct AssociatedDetection {
    Box box;
    double score = 0.0;
    std::vector<std::optional<AssociatedPart>> parts;
};

/// A part detection that survived NMS but was not claimed by any body slot.
/// Emitted only when association is not required; the double-check filter is
/// exactly the act of dropping these (plus bodies failing the check slot).
struct UnassociatedPart {
    int slot = 0;
    Box box;
    double score = 0.0;
};

/// All detections for one image.
struct DetectionRecord {
    std::string image_id;
    std::vector<AssociatedDetection> bodies;
    std::vector<UnassociatedPart> extra_parts;
};

}  // namespace bpj
