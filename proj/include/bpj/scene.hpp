#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bpj/geometry.hpp"
#include "bpj/grid_spec.hpp"

namespace bpj {

/// Hand-contact ground truth: one state value per physical state channel.
/// 0 = negative, 1 = positive, 2 = unsure (excluded from loss and metrics).
using ContactStates = std::array<int, 4>;

/// One annotated part slot of a body. Slots may be absent entirely (nullopt
/// in BodyAnnotation::parts); present parts carry a visibility flag — an
/// invisible part contributes no targets and no metric ground truth.
struct PartAnnotation {
    Box box;
    int visible = 1;
    std::optional<ContactStates> contact;
};

struct BodyAnnotation {
    std::string body_id;
    Box box;
    std::vector<std::optional<PartAnnotation>> parts;  // size = spec.part_count
};

/// Ground-truth record for one image.
struct Scene {
    std::string image_id;
    int width = 0;
    int height = 0;
    std::vector<BodyAnnotation> bodies;

    /// Structural validation against a spec: slot counts, box containment,
    /// contact presence only for the contact variant. Throws DataError.
    void validate(const GridSpec& spec) const;
};

}  // namespace bpj
