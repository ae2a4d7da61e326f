#include "bpj/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "bpj/assigner.hpp"
#include "bpj/decoder.hpp"
#include "bpj/geometry.hpp"
#include "bpj/rng.hpp"

namespace bpj {

namespace {

/// Substream indices, fixed so every perturbation kind has its own
/// independent stream and changing one sigma never shifts another group's
/// draws.
constexpr std::uint64_t kStreamMute = 11;
constexpr std::uint64_t kStreamInject = 15;
constexpr std::uint64_t kStreamBoxNoise = 21;
constexpr std::uint64_t kStreamOffsetNoise = 22;
constexpr std::uint64_t kStreamScoreNoise = 23;

// Shipped layout presets. These are configuration documents: position and
// size bands keep each slot inside the body box and wide enough that every
// part matches an anchor at the finest stride for bodies down to 48 px.
const char* const kPresetHumanoidK1 = R"json({
  "name": "humanoid-k1-head",
  "variant": "anchor_based",
  "slots": [
    {"label": "head", "cx": [0.38, 0.62], "cy": [0.12, 0.18],
     "w": [0.18, 0.26], "h": [0.12, 0.20], "visibility": 0.95}
  ]
})json";

const char* const kPresetHumanoidK2 = R"json({
  "name": "humanoid-k2-hands",
  "variant": "anchor_based_contact",
  "contact_slots": [0, 1],
  "slots": [
    {"label": "left_hand", "cx": [0.10, 0.22], "cy": [0.42, 0.62],
     "w": [0.11, 0.17], "h": [0.10, 0.16], "visibility": 0.9},
    {"label": "right_hand", "cx": [0.78, 0.90], "cy": [0.42, 0.62],
     "w": [0.11, 0.17], "h": [0.10, 0.16], "visibility": 0.9}
  ]
})json";

const char* const kPresetHumanoidK6 = R"json({
  "name": "humanoid-k6",
  "variant": "anchor_based",
  "slots": [
    {"label": "head", "cx": [0.40, 0.60], "cy": [0.12, 0.16],
     "w": [0.18, 0.26], "h": [0.12, 0.18], "visibility": 0.95},
    {"label": "face", "cx": [0.42, 0.58], "cy": [0.14, 0.19],
     "w": [0.12, 0.18], "h": [0.10, 0.15], "visibility": 0.85},
    {"label": "left_hand", "cx": [0.10, 0.20], "cy": [0.45, 0.60],
     "w": [0.10, 0.16], "h": [0.10, 0.15], "visibility": 0.9},
    {"label": "right_hand", "cx": [0.80, 0.90], "cy": [0.45, 0.60],
     "w": [0.10, 0.16], "h": [0.10, 0.15], "visibility": 0.9},
    {"label": "left_foot", "cx": [0.22, 0.35], "cy": [0.88, 0.93],
     "w": [0.12, 0.17], "h": [0.10, 0.13], "visibility": 0.85},
    {"label": "right_foot", "cx": [0.65, 0.78], "cy": [0.88, 0.93],
     "w": [0.12, 0.17], "h": [0.10, 0.13], "visibility": 0.85}
  ]
})json";

const char* const kPresetQuadrupedK5 = R"json({
  "name": "quadruped-k5",
  "variant": "anchor_based",
  "slots": [
    {"label": "head", "cx": [0.14, 0.26], "cy": [0.20, 0.32],
     "w": [0.16, 0.24], "h": [0.16, 0.24], "visibility": 0.95},
    {"label": "front_left_paw", "cx": [0.20, 0.32], "cy": [0.84, 0.90],
     "w": [0.10, 0.15], "h": [0.10, 0.14], "visibility": 0.85},
    {"label": "front_right_paw", "cx": [0.36, 0.48], "cy": [0.84, 0.90],
     "w": [0.10, 0.15], "h": [0.10, 0.14], "visibility": 0.85},
    {"label": "back_left_paw", "cx": [0.56, 0.68], "cy": [0.84, 0.90],
     "w": [0.10, 0.15], "h": [0.10, 0.14], "visibility": 0.85},
    {"label": "back_right_paw", "cx": [0.72, 0.84], "cy": [0.84, 0.90],
     "w": [0.10, 0.15], "h": [0.10, 0.14], "visibility": 0.85}
  ]
})json";

struct PresetEntry {
    const char* name;
    const char* json;
};

constexpr PresetEntry kPresets[] = {
    {"humanoid-k1-head", kPresetHumanoidK1},
    {"humanoid-k2-hands", kPresetHumanoidK2},
    {"humanoid-k6", kPresetHumanoidK6},
    {"quadruped-k5", kPresetQuadrupedK5},
};

void check_range(const std::string& where, double lo, double hi, double low_bound,
                 double high_bound) {
    if (!(lo <= hi) || lo < low_bound || hi > high_bound) {
        throw DataError("layout: " + where + " range [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "] must be ordered inside [" +
                        std::to_string(low_bound) + ", " + std::to_string(high_bound) + "]");
    }
}

std::array<double, 2> read_pair(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2) {
        throw DataError(std::string("layout: '") + key + "' must be a [min, max] pair");
    }
    return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

void PartLayout::validate() const {
    if (name.empty()) {
        throw DataError("layout: name must not be empty");
    }
    if (slots.empty()) {
        throw DataError("layout: at least one slot is required");
    }
    for (const SlotModel& s : slots) {
        if (s.label.empty()) {
            throw DataError("layout: slot labels must not be empty");
        }
        const std::string where = "slot '" + s.label + "'";
        if (!(s.w_min > 0.0) || !(s.h_min > 0.0)) {
            throw DataError("layout: " + where + " sizes must be positive");
        }
        if (s.w_max > 1.0 || s.h_max > 1.0) {
            throw DataError("layout: " + where + " cannot be larger than the body");
        }
        check_range(where + " cx", s.cx_min, s.cx_max, 0.0, 1.0);
        check_range(where + " cy", s.cy_min, s.cy_max, 0.0, 1.0);
        check_range(where + " w", s.w_min, s.w_max, 0.0, 1.0);
        check_range(where + " h", s.h_min, s.h_max, 0.0, 1.0);
        // worst-case extent must stay inside the body box
        if (s.cx_min - s.w_max / 2 < 0.0 || s.cx_max + s.w_max / 2 > 1.0 ||
            s.cy_min - s.h_max / 2 < 0.0 || s.cy_max + s.h_max / 2 > 1.0) {
            throw DataError("layout: " + where + " can extend outside the body box");
        }
        if (s.visibility < 0.0 || s.visibility > 1.0) {
            throw DataError("layout: " + where + " visibility must lie in [0, 1]");
        }
    }
    if (variant == Variant::anchor_based_contact) {
        if (contact_slots.empty()) {
            throw DataError("layout: the contact variant needs contact slots");
        }
        for (const int s : contact_slots) {
            if (s < 0 || s >= k()) {
                throw DataError("layout: contact slot " + std::to_string(s) +
                                " outside [0, " + std::to_string(k()) + ")");
            }
        }
    } else if (!contact_slots.empty()) {
        throw DataError("layout: contact slots require the contact variant");
    }
}

PartLayout PartLayout::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("layout: invalid JSON: ") + e.what());
    }
    PartLayout layout;
    try {
        layout.name = j.at("name").get<std::string>();
        layout.variant = variant_from_name(j.value("variant", std::string("anchor_based")));
        if (j.contains("contact_slots")) {
            layout.contact_slots = j.at("contact_slots").get<std::vector<int>>();
        }
        for (const auto& js : j.at("slots")) {
            SlotModel s;
            s.label = js.at("label").get<std::string>();
            const auto cx = read_pair(js, "cx");
            const auto cy = read_pair(js, "cy");
            const auto w = read_pair(js, "w");
            const auto h = read_pair(js, "h");
            s.cx_min = cx[0];
            s.cx_max = cx[1];
            s.cy_min = cy[0];
            s.cy_max = cy[1];
            s.w_min = w[0];
            s.w_max = w[1];
            s.h_min = h[0];
            s.h_max = h[1];
            s.visibility = js.value("visibility", 1.0);
            layout.slots.push_back(s);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("layout: missing or mistyped field: ") + e.what());
    }
    layout.validate();
    return layout;
}

std::string PartLayout::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["variant"] = variant_name(variant);
    if (!contact_slots.empty()) {
        j["contact_slots"] = contact_slots;
    }
    auto slots_json = nlohmann::json::array();
    for (const SlotModel& s : slots) {
        slots_json.push_back({{"label", s.label},
                              {"cx", {s.cx_min, s.cx_max}},
                              {"cy", {s.cy_min, s.cy_max}},
                              {"w", {s.w_min, s.w_max}},
                              {"h", {s.h_min, s.h_max}},
                              {"visibility", s.visibility}});
    }
    j["slots"] = slots_json;
    return j.dump(2);
}

PartLayout PartLayout::preset(const std::string& name) {
    for (const PresetEntry& entry : kPresets) {
        if (name == entry.name) {
            return from_json(entry.json);
        }
    }
    std::string known;
    for (const PresetEntry& entry : kPresets) {
        if (!known.empty()) known += ", ";
        known += entry.name;
    }
    throw DataError("unknown layout preset '" + name + "' (available: " + known + ")");
}

std::vector<std::string> PartLayout::preset_names() {
    std::vector<std::string> names;
    for (const PresetEntry& entry : kPresets) {
        names.emplace_back(entry.name);
    }
    return names;
}

GridSpec PartLayout::make_spec(int image_w, int image_h) const {
    validate();
    GridSpec spec;
    spec.variant = variant;
    spec.part_count = k();
    spec.part_labels.clear();
    for (const SlotModel& s : slots) {
        spec.part_labels.push_back(s.label);
    }
    if (variant == Variant::anchor_based_contact) {
        spec.contact_slots = contact_slots;
    }
    spec.image_w = image_w;
    spec.image_h = image_h;
    if (variant != Variant::anchor_free) {
        spec.anchors = GridSpec::default_anchors(spec.strides);
    }
    spec.validate();
    return spec;
}

void NoiseModel::validate() const {
    if (sigma_box < 0 || sigma_offset < 0 || sigma_score < 0) {
        throw DataError("noise: sigmas must be non-negative");
    }
    if (fn_rate < 0 || fn_rate > 1 || fp_body_rate < 0 || fp_body_rate > 1 ||
        fp_part_rate < 0 || fp_part_rate > 1) {
        throw DataError("noise: injection rates must lie in [0, 1]");
    }
}

void SynthConfig::validate() const {
    layout.validate();
    if (n_images < 0) {
        throw DataError("synth: n_images must be non-negative");
    }
    if (min_bodies < 0 || max_bodies < min_bodies) {
        throw DataError("synth: body count range is empty or negative");
    }
    if (!(min_body_w > 0.0) || max_body_w < min_body_w) {
        throw DataError("synth: body width range is empty or non-positive");
    }
    if (max_aspect < 1.0) {
        throw DataError("synth: max_aspect must be at least 1");
    }
    if (occlusion_cap < 0.0 || occlusion_cap > 1.0) {
        throw DataError("synth: occlusion_cap must lie in [0, 1]");
    }
    if (visibility_override && (*visibility_override < 0.0 || *visibility_override > 1.0)) {
        throw DataError("synth: visibility_override must lie in [0, 1]");
    }
    if (contact_positive < 0.0 || contact_unsure < 0.0 ||
        contact_positive + contact_unsure > 1.0) {
        throw DataError("synth: contact state probabilities must be non-negative and sum to "
                        "at most 1");
    }
    // the largest possible body must still fit with a placement margin
    const double margin = 4.0;
    if (max_body_w + margin > width || max_body_w * max_aspect + margin > height) {
        throw DataError("synth: bodies of width " + std::to_string(max_body_w) +
                        " cannot fit a " + std::to_string(width) + "x" +
                        std::to_string(height) + " image");
    }
    make_spec();  // image size must divide all strides
}

namespace {

/// A scene is only usable as ground truth if its grid encoding round-trips:
/// the target writer resolves cell-ownership collisions by overwrite, so a
/// draw can, rarely, lose an object entirely (e.g. two parts of one body with
/// near-coincident centers claiming the same cells at every matching stride
/// and anchor).  Such draws are rejected and redrawn.
bool identity_decodable(const Scene& scene, const GridSpec& spec) {
    const AssignResult assigned = assign(scene, spec);
    if (assigned.stats.skipped_objects != 0 || assigned.stats.unmatched_objects != 0) {
        return false;
    }
    const DetectionRecord rec = decode_image(identity_prediction(assigned.targets, spec), spec,
                                             DecodeConfig{}, scene.image_id);
    if (!rec.extra_parts.empty() || rec.bodies.size() != scene.bodies.size()) {
        return false;
    }
    std::vector<char> used(rec.bodies.size(), 0);
    for (const BodyAnnotation& gt : scene.bodies) {
        int found = -1;
        for (std::size_t d = 0; d < rec.bodies.size(); ++d) {
            if (!used[d] && iou(rec.bodies[d].box, gt.box) >= 0.9) {
                found = static_cast<int>(d);
                break;
            }
        }
        if (found < 0) return false;
        used[static_cast<std::size_t>(found)] = 1;
        const AssociatedDetection& det = rec.bodies[static_cast<std::size_t>(found)];
        for (std::size_t j = 0; j < gt.parts.size(); ++j) {
            const bool want = gt.parts[j].has_value() && gt.parts[j]->visible == 1;
            if (want != det.parts[j].has_value()) return false;
            if (want && iou(det.parts[j]->box, gt.parts[j]->box) < 0.9) return false;
        }
    }
    return true;
}

}  // namespace

Scene gen_scene(const SynthConfig& config, int image_index) {
    config.validate();
    Rng rng = Rng::derive(config.seed, static_cast<std::uint64_t>(image_index));
    const GridSpec spec = config.make_spec();

    Scene scene;
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%06d", image_index);
    scene.image_id = id;
    scene.width = config.width;
    scene.height = config.height;

    const bool contact = config.layout.variant == Variant::anchor_based_contact;
    std::vector<char> is_contact_slot(static_cast<std::size_t>(config.layout.k()), 0);
    for (const int s : config.layout.contact_slots) {
        is_contact_slot[static_cast<std::size_t>(s)] = 1;
    }

    for (int draw = 0; draw < 50; ++draw) {
        scene.bodies.clear();
        const int n_bodies =
            static_cast<int>(rng.uniform_int(config.min_bodies, config.max_bodies));
        for (int b = 0; b < n_bodies; ++b) {
            Box body_box;
            bool placed = false;
            for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
                const double bw = rng.uniform(config.min_body_w, config.max_body_w);
                const double bh = bw * rng.uniform(1.0, config.max_aspect);
                if (bh + 4.0 > config.height) continue;
                const double x1 = rng.uniform(2.0, config.width - 2.0 - bw);
                const double y1 = rng.uniform(2.0, config.height - 2.0 - bh);
                const Box candidate{x1, y1, x1 + bw, y1 + bh};
                placed = true;
                for (const BodyAnnotation& other : scene.bodies) {
                    if (iou(candidate, other.box) > config.occlusion_cap) {
                        placed = false;
                        break;
                    }
                }
                if (placed) body_box = candidate;
            }
            if (!placed) break;  // image is saturated; keep what fits

            BodyAnnotation body;
            body.body_id = "b" + std::to_string(scene.bodies.size());
            body.box = body_box;
            const double bw = body_box.x2 - body_box.x1;
            const double bh = body_box.y2 - body_box.y1;
            for (int j = 0; j < config.layout.k(); ++j) {
                const SlotModel& slot = config.layout.slots[static_cast<std::size_t>(j)];
                const double vis_p = config.visibility_override.value_or(slot.visibility);
                if (rng.uniform() >= vis_p) {
                    body.parts.emplace_back(std::nullopt);
                    continue;
                }
                PartAnnotation part;
                const double pcx = body_box.x1 + bw * rng.uniform(slot.cx_min, slot.cx_max);
                const double pcy = body_box.y1 + bh * rng.uniform(slot.cy_min, slot.cy_max);
                const double pw = bw * rng.uniform(slot.w_min, slot.w_max);
                const double ph = bh * rng.uniform(slot.h_min, slot.h_max);
                part.box = Box::from_center(pcx, pcy, pw, ph);
                part.visible = 1;
                if (contact && is_contact_slot[static_cast<std::size_t>(j)]) {
                    ContactStates states{};
                    for (auto& state : states) {
                        const double u = rng.uniform();
                        state = u < config.contact_positive ? 1
                                : u < config.contact_positive + config.contact_unsure ? 2
                                                                                      : 0;
                    }
                    part.contact = states;
                }
                body.parts.emplace_back(part);
            }
            scene.bodies.push_back(std::move(body));
        }
        if (identity_decodable(scene, spec)) {
            scene.validate(spec);
            return scene;
        }
    }
    throw DataError("synth: layout for image " + scene.image_id +
                    " kept losing objects to grid collisions; the part bands are too crowded");
}

std::vector<Scene> gen_scenes(const SynthConfig& config) {
    config.validate();
    std::vector<Scene> scenes;
    scenes.reserve(static_cast<std::size_t>(config.n_images));
    for (int i = 0; i < config.n_images; ++i) {
        scenes.push_back(gen_scene(config, i));
    }
    return scenes;
}

std::vector<GridTensor> identity_prediction(const std::vector<GridTensor>& targets,
                                            const GridSpec& spec) {
    const ChannelLayout layout = channel_layout(spec);
    const int k = spec.part_count;
    std::vector<GridTensor> pred = targets;
    for (GridTensor& t : pred) {
        for (int a = 0; a < t.anchors; ++a) {
            for (int ch = 0; ch < t.channels; ++ch) {
                const bool is_box = ch >= layout.box && ch < layout.box + 4;
                const bool is_off = ch >= layout.off && ch < layout.off + 2 * k;
                const bool is_cls = ch >= layout.cls && ch < layout.cls + k + 1;
                const bool is_obj = spec.variant != Variant::anchor_free && ch == layout.obj;
                for (int r = 0; r < t.height; ++r) {
                    for (int c = 0; c < t.width; ++c) {
                        float& v = t.at(a, ch, r, c);
                        if (is_obj) {
                            v = static_cast<float>(clamped_logit(v));
                        } else if (is_box || is_off) {
                            if (std::isnan(v)) v = 0.0f;
                        } else if (is_cls) {
                            v = std::isnan(v) ? static_cast<float>(clamped_logit(0.0))
                                              : static_cast<float>(clamped_logit(v));
                        } else {
                            // contact channels: state in {0,1}, or neutral for
                            // unsure / unannotated
                            v = (std::isnan(v) || v == 2.0f)
                                    ? 0.0f
                                    : static_cast<float>(clamped_logit(v));
                        }
                    }
                }
            }
        }
    }
    return pred;
}

namespace {

/// Writes one spurious confident prediction into the rendered grids. Returns
/// false when no free site could be found.
bool inject_object(std::vector<GridTensor>& pred, const GridSpec& spec,
                   const ChannelLayout& layout, Rng& rng, int kind, double w, double h) {
    const int k = spec.part_count;
    const double conf = rng.uniform(0.3, 0.95);
    for (int attempt = 0; attempt < 20; ++attempt) {
        const double cx = rng.uniform(w / 2 + 1.0, spec.image_w - w / 2 - 1.0);
        const double cy = rng.uniform(h / 2 + 1.0, spec.image_h - h / 2 - 1.0);
        // first stride+anchor whose prior fits the fake size
        int si = -1;
        int anchor = -1;
        for (std::size_t s = 0; s < spec.strides.size() && si < 0; ++s) {
            if (spec.variant == Variant::anchor_free) {
                si = static_cast<int>(s);
                anchor = 0;
                break;
            }
            for (std::size_t a = 0; a < spec.anchors[s].size(); ++a) {
                if (anchor_match(w, h, spec.anchors[s][a])) {
                    si = static_cast<int>(s);
                    anchor = static_cast<int>(a);
                    break;
                }
            }
        }
        if (si < 0) return false;
        const int stride = spec.strides[static_cast<std::size_t>(si)];
        GridTensor& grid = pred[static_cast<std::size_t>(si)];
        const int cell_x = std::min(static_cast<int>(cx / stride), grid.width - 1);
        const int cell_y = std::min(static_cast<int>(cy / stride), grid.height - 1);

        // skip sites that already carry an object (objectness raw, or any
        // class raw, above the neutral negative level)
        bool occupied = false;
        if (spec.variant != Variant::anchor_free) {
            occupied = grid.at(anchor, layout.obj, cell_y, cell_x) > 0.0f;
        } else {
            for (int c = 0; c < k + 1 && !occupied; ++c) {
                occupied = grid.at(anchor, layout.cls + c, cell_y, cell_x) > 0.0f;
            }
        }
        if (occupied) continue;

        ExtendedObject obj;
        obj.kind = kind;
        obj.class_scores.assign(static_cast<std::size_t>(k + 1), 0.0);
        const int cls_index = kind == kBodyKind ? 0 : kind + 1;
        obj.offsets.assign(static_cast<std::size_t>(k), Offset{});
        std::vector<double> raws;
        if (spec.variant == Variant::anchor_free) {
            obj.class_scores[static_cast<std::size_t>(cls_index)] = conf;
            // center the fake on the cell's sampling location p so every side
            // distance is positive; offsets are displacements from p
            const double px = cell_x + 0.5;
            const double py = cell_y + 0.5;
            obj.box = Box::from_center(px, py, w / stride, h / stride);
            if (kind == kBodyKind) {
                for (auto& off : obj.offsets) {
                    off = Offset{0.0, 0.0, true};
                }
            }
            raws = encode_targets_free(obj, spec, layout, px, py);
        } else {
            obj.objectness = conf;
            obj.class_scores[static_cast<std::size_t>(cls_index)] = 1.0;
            if (spec.has_contact()) {
                obj.contact = {{{0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}}};
            }
            // cell frame: center relative to the cell origin, size in grid
            // units
            const double gx = cx / stride - cell_x;
            const double gy = cy / stride - cell_y;
            obj.box = Box::from_center(gx, gy, w / stride, h / stride);
            if (kind == kBodyKind) {
                for (auto& off : obj.offsets) {
                    off = Offset{gx, gy, true};  // slot centers on the fake body
                }
            }
            raws = encode_targets(obj, spec, layout, stride, anchor);
        }
        for (int ch = 0; ch < grid.channels; ++ch) {
            grid.at(anchor, ch, cell_y, cell_x) =
                static_cast<float>(raws[static_cast<std::size_t>(ch)]);
        }
        return true;
    }
    return false;
}

}  // namespace

std::vector<GridTensor> render_predicted(const Scene& scene, const GridSpec& spec,
                                         const NoiseModel& noise, std::uint64_t seed) {
    noise.validate();
    spec.validate();

    // false negatives: mute whole bodies before assignment
    const Scene* source = &scene;
    Scene muted;
    if (noise.fn_rate > 0.0) {
        Rng fn_rng = Rng::derive(seed, kStreamMute);
        muted = scene;
        muted.bodies.clear();
        for (const BodyAnnotation& body : scene.bodies) {
            if (fn_rng.uniform() >= noise.fn_rate) {
                muted.bodies.push_back(body);
            }
        }
        source = &muted;
    }

    const AssignResult assigned = assign(*source, spec);
    std::vector<GridTensor> pred = identity_prediction(assigned.targets, spec);
    const ChannelLayout layout = channel_layout(spec);
    const int k = spec.part_count;

    // false positives: one optional spurious object per real object
    if (noise.fp_body_rate > 0.0 || noise.fp_part_rate > 0.0) {
        Rng fp_rng = Rng::derive(seed, kStreamInject);
        for (const BodyAnnotation& body : source->bodies) {
            if (fp_rng.uniform() < noise.fp_body_rate) {
                const double scale = fp_rng.uniform(0.8, 1.25);
                inject_object(pred, spec, layout, fp_rng, kBodyKind,
                              (body.box.x2 - body.box.x1) * scale,
                              (body.box.y2 - body.box.y1) * scale);
            }
            for (int j = 0; j < k; ++j) {
                const auto& part = body.parts[static_cast<std::size_t>(j)];
                if (!part || part->visible != 1) continue;
                if (fp_rng.uniform() < noise.fp_part_rate) {
                    const double scale = fp_rng.uniform(0.8, 1.25);
                    inject_object(pred, spec, layout, fp_rng, j,
                                  (part->box.x2 - part->box.x1) * scale,
                                  (part->box.y2 - part->box.y1) * scale);
                }
            }
        }
    }

    // Gaussian noise per channel group, each from its own stream so one
    // group's sigma never changes another group's draws. Score-like channels
    // are not contiguous (objectness, classes and contact are separated by
    // other groups), so a group is a list of channel ranges sharing a stream.
    struct Group {
        double sigma;
        std::vector<std::array<int, 2>> ranges;  // {first, count}
        std::uint64_t stream;
    };
    std::vector<std::array<int, 2>> score_ranges;
    if (spec.variant != Variant::anchor_free) {
        score_ranges.push_back({layout.obj, 1});
    }
    score_ranges.push_back({layout.cls, k + 1});
    if (spec.has_contact()) {
        score_ranges.push_back({layout.contact, 8});
    }
    const Group groups[] = {
        {noise.sigma_box, {{layout.box, 4}}, kStreamBoxNoise},
        {noise.sigma_offset, {{layout.off, 2 * k}}, kStreamOffsetNoise},
        {noise.sigma_score, score_ranges, kStreamScoreNoise},
    };
    for (const Group& group : groups) {
        if (group.sigma <= 0.0) continue;
        Rng noise_rng = Rng::derive(seed, group.stream);
        for (GridTensor& t : pred) {
            for (int a = 0; a < t.anchors; ++a) {
                for (const auto& range : group.ranges) {
                    for (int ch = range[0]; ch < range[0] + range[1]; ++ch) {
                        for (int r = 0; r < t.height; ++r) {
                            for (int c = 0; c < t.width; ++c) {
                                t.at(a, ch, r, c) +=
                                    static_cast<float>(group.sigma * noise_rng.normal());
                            }
                        }
                    }
                }
            }
        }
    }
    return pred;
}

}  // namespace bpj
