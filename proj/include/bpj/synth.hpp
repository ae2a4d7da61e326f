#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bpj/grid_spec.hpp"
#include "bpj/scene.hpp"

namespace bpj {

/// Placement model for one part slot. All ranges are fractions of the body
/// box: the part center is drawn from [cx_min,cx_max] x [cy_min,cy_max]
/// (relative to the body's top-left corner, in units of body width/height)
/// and its size from [w_min,w_max] x [h_min,h_max] (fractions of body
/// width/height). Bounds must keep the part fully inside the body box, so
/// every generated part has containment ratio 1 against its body.
struct SlotModel {
    std::string label;
    double cx_min = 0.5, cx_max = 0.5;
    double cy_min = 0.5, cy_max = 0.5;
    double w_min = 0.2, w_max = 0.2;
    double h_min = 0.2, h_max = 0.2;
    double visibility = 1.0;  // probability a body carries this part
};

/// Part layout model: named configuration data, serialized as JSON. Shipped
/// presets cover one-, two-, five- and six-slot anatomies (see
/// `preset_names()`).
struct PartLayout {
    std::string name;
    Variant variant = Variant::anchor_based;
    std::vector<SlotModel> slots;
    std::vector<int> contact_slots;  // only for the contact variant

    int k() const { return static_cast<int>(slots.size()); }
    /// Throws DataError on empty slots, range violations, parts that could
    /// leave the body box (or exceed it in size), or contact slots that do
    /// not fit the variant.
    void validate() const;

    static PartLayout from_json(const std::string& text);
    std::string to_json() const;

    /// A shipped preset by name; throws DataError for unknown names.
    static PartLayout preset(const std::string& name);
    static std::vector<std::string> preset_names();

    /// Grid spec matching this layout: default strides and anchors, labels
    /// and contact slots from the layout.
    GridSpec make_spec(int image_w, int image_h) const;
};

/// Perturbation model applied to rendered prediction grids, in raw channel
/// space. All-zero noise reproduces the encoded targets exactly.
struct NoiseModel {
    double sigma_box = 0.0;     // Gaussian sigma on raw box channels
    double sigma_offset = 0.0;  // Gaussian sigma on raw offset channels
    double sigma_score = 0.0;   // Gaussian sigma on objectness/class/contact
    double fn_rate = 0.0;       // probability a body (with its parts) is muted
    double fp_body_rate = 0.0;  // per real body: chance of a spurious body
    double fp_part_rate = 0.0;  // per real visible part: chance of a spurious
                                // part of the same slot
    void validate() const;      // throws DataError on negatives or rates > 1
};

/// Generator configuration. Same seed, same config: identical output.
struct SynthConfig {
    std::uint64_t seed = 1;
    int n_images = 1;
    int width = 256;
    int height = 256;
    int min_bodies = 1;
    int max_bodies = 4;
    double min_body_w = 48.0;       // body width range, pixels
    double max_body_w = 120.0;
    double max_aspect = 1.4;        // body height = width * U[1, max_aspect]
    double occlusion_cap = 0.0;     // highest allowed pairwise body IoU
    /// When set, replaces every slot's visibility probability (0 produces
    /// scenes with bodies only).
    std::optional<double> visibility_override;
    double contact_positive = 0.4;  // per contact channel: P(state 1)
    double contact_unsure = 0.2;    // per contact channel: P(state 2)
    PartLayout layout;

    void validate() const;  // throws DataError; includes layout.validate()
    GridSpec make_spec() const { return layout.make_spec(width, height); }
};

/// One scene from the image-indexed substream `Rng::derive(seed, index)`, so
/// images can be generated independently and in parallel.  Every returned
/// scene round-trips through the grid encoding: a draw whose objects would be
/// lost to cell-ownership collisions is rejected and redrawn (throws DataError
/// after 50 failed draws, which indicates an overcrowded layout).
Scene gen_scene(const SynthConfig& config, int image_index);

/// All scenes, in image-index order.
std::vector<Scene> gen_scenes(const SynthConfig& config);

/// The identity rendering of target grids into prediction-shaped raw grids:
/// box and offset channels are copied (masked slots become 0), score-like
/// channels pass through the saturating inverse sigmoid, unsure or absent
/// contact states become the neutral raw 0. Decoding the result reproduces
/// the encoded objects.
std::vector<GridTensor> identity_prediction(const std::vector<GridTensor>& targets,
                                            const GridSpec& spec);

/// Renders perturbed prediction grids for a scene: assignment, identity
/// rendering, spurious-object injection, then Gaussian noise per channel
/// group. `seed` drives only the perturbations (derive it per image); with an
/// all-zero NoiseModel the output equals
/// identity_prediction(assign(scene).targets).
std::vector<GridTensor> render_predicted(const Scene& scene, const GridSpec& spec,
                                         const NoiseModel& noise, std::uint64_t seed = 0);

}  // namespace bpj
