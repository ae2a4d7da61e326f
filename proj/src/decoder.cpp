#include "bpj/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bpj/geometry.hpp"

namespace bpj {

namespace {

/// Raw-space confidence floor: sites whose objectness raw value falls below
/// this cannot reach probability `conf` for any class, so they are skipped
/// before the full cell decode.
double raw_gate(double conf) {
    if (conf <= 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    if (conf >= 1.0) {
        return std::numeric_limits<double>::infinity();
    }
    return std::log(conf / (1.0 - conf));
}

void check_grids(const std::vector<GridTensor>& grids, const GridSpec& spec) {
    if (grids.size() != spec.strides.size()) {
        throw DataError("decode: expected " + std::to_string(spec.strides.size()) +
                        " grids, got " + std::to_string(grids.size()));
    }
    const int channels = spec.channels();
    for (std::size_t i = 0; i < grids.size(); ++i) {
        const GridTensor& g = grids[i];
        const int stride = spec.strides[i];
        if (g.stride != stride || g.channels != channels ||
            g.height != spec.grid_h(stride) || g.width != spec.grid_w(stride) ||
            g.anchors != spec.anchors_per_stride()) {
            throw DataError("decode: grid " + std::to_string(i) +
                            " does not match the spec shape at stride " + std::to_string(stride));
        }
    }
}

/// Extracts every above-threshold candidate in deterministic enumeration
/// order: stride ascending, anchor, row, column, class.
std::vector<Candidate> extract_candidates(const std::vector<GridTensor>& grids,
                                          const GridSpec& spec, const ChannelLayout& layout,
                                          const DecodeConfig& config, DecodeStats* stats) {
    const int k = spec.part_count;
    const bool has_obj = spec.variant != Variant::anchor_free;
    const double min_conf = std::min(config.body_conf, config.part_conf);
    const double obj_gate = raw_gate(min_conf);
    const double body_gate = raw_gate(config.body_conf);
    const double part_gate = raw_gate(config.part_conf);
    std::vector<Candidate> out;
    std::vector<float> raw(static_cast<std::size_t>(layout.total));

    for (std::size_t si = 0; si < grids.size(); ++si) {
        const GridTensor& g = grids[si];
        const int stride = g.stride;
        const std::size_t plane = static_cast<std::size_t>(g.height) * g.width;
        for (int a = 0; a < g.anchors; ++a) {
            const float* base = g.values.data() +
                                static_cast<std::size_t>(a) * layout.total * plane;
            for (int r = 0; r < g.height; ++r) {
                for (int c = 0; c < g.width; ++c) {
                    if (stats) ++stats->sites_scanned;
                    const std::size_t cell = static_cast<std::size_t>(r) * g.width + c;
                    if (has_obj) {
                        const float obj_raw = base[layout.obj * plane + cell];
                        if (obj_raw < obj_gate) {
                            continue;
                        }
                    } else {
                        bool possible = false;
                        for (int ci = 0; ci <= k && !possible; ++ci) {
                            const double gate = ci == 0 ? body_gate : part_gate;
                            possible = base[layout.cls_channel(ci) * plane + cell] >= gate;
                        }
                        if (!possible) {
                            continue;
                        }
                    }
                    for (int ch = 0; ch < layout.total; ++ch) {
                        raw[static_cast<std::size_t>(ch)] = base[ch * plane + cell];
                    }
                    ExtendedObject obj;
                    double px = 0.0;
                    double py = 0.0;
                    if (has_obj) {
                        obj = decode_cell(raw.data(), spec, layout, stride, a, c, r);
                    } else {
                        px = c + 0.5;
                        py = r + 0.5;
                        obj = decode_cell_free(raw.data(), spec, layout, stride, px, py);
                    }
                    for (int ci = 0; ci <= k; ++ci) {
                        const double conf = obj.confidence(ci, has_obj);
                        const double floor = ci == 0 ? config.body_conf : config.part_conf;
                        if (conf < floor) {
                            continue;
                        }
                        Candidate cand;
                        cand.kind = ci == 0 ? kBodyKind : ci - 1;
                        cand.box = Box{obj.box.x1 * stride, obj.box.y1 * stride,
                                       obj.box.x2 * stride, obj.box.y2 * stride};
                        cand.score = conf;
                        cand.degenerate = obj.degenerate;
                        if (ci == 0) {
                            cand.centers.resize(static_cast<std::size_t>(k));
                            for (int j = 0; j < k; ++j) {
                                // offsets are displacements from the cell
                                // origin (the anchor point for the
                                // offset-scale-1 variant); add it back before
                                // going to pixels
                                const double ox = has_obj ? obj.offsets[j].x + c
                                                          : obj.offsets[j].x + px;
                                const double oy = has_obj ? obj.offsets[j].y + r
                                                          : obj.offsets[j].y + py;
                                cand.centers[static_cast<std::size_t>(j)] = {ox * stride,
                                                                             oy * stride};
                            }
                        }
                        cand.contact = obj.contact;
                        out.push_back(std::move(cand));
                    }
                }
            }
        }
    }
    if (stats) stats->candidates += static_cast<long>(out.size());
    return out;
}

std::vector<std::size_t> sorted_by_score(const std::vector<Candidate>& objects) {
    std::vector<std::size_t> order(objects.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return objects[a].score > objects[b].score;
    });
    return order;
}

}  // namespace

void DecodeConfig::validate(const GridSpec& spec) const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0 && std::isfinite(v); };
    if (!in_unit(body_conf) || !in_unit(part_conf) || !in_unit(body_iou) ||
        !in_unit(part_iou) || !in_unit(inner_iou)) {
        throw DataError("decode config: thresholds must lie in [0, 1]");
    }
    if (max_detections <= 0) {
        throw DataError("decode config: max_detections must be positive");
    }
    if (require_association &&
        (*require_association < 0 || *require_association >= spec.part_count)) {
        throw DataError("decode config: check slot " + std::to_string(*require_association) +
                        " outside [0, " + std::to_string(spec.part_count) + ")");
    }
    if (contact_weight_part < 0.0 || contact_weight_body < 0.0 ||
        contact_weight_part + contact_weight_body <= 0.0) {
        throw DataError("decode config: contact fusion weights must be non-negative with a "
                        "positive sum");
    }
}

std::vector<Candidate> nms(const std::vector<Candidate>& objects, double tau_conf,
                           double tau_iou, int max_detections) {
    std::vector<std::size_t> order = sorted_by_score(objects);
    std::vector<Candidate> kept;
    std::vector<int> kept_per_kind;
    for (std::size_t idx : order) {
        const Candidate& cand = objects[idx];
        if (cand.score < tau_conf) {
            break;  // sorted descending: everything after fails too
        }
        bool suppressed = false;
        int same_kind = 0;
        for (const Candidate& keep : kept) {
            if (keep.kind != cand.kind) {
                continue;
            }
            ++same_kind;
            if (iou(keep.box, cand.box) > tau_iou) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed && same_kind < max_detections) {
            kept.push_back(cand);
        }
    }
    return kept;
}

AssociationResult associate(const std::vector<Candidate>& bodies,
                            const std::vector<Candidate>& parts, const GridSpec& spec,
                            const DecodeConfig& config) {
    const int k = spec.part_count;
    AssociationResult result;
    result.detections.reserve(bodies.size());
    for (const Candidate& b : bodies) {
        AssociatedDetection det;
        det.box = b.box;
        det.score = b.score;
        det.parts.assign(static_cast<std::size_t>(k), std::nullopt);
        result.detections.push_back(std::move(det));
    }
    result.occupants.assign(bodies.size() * static_cast<std::size_t>(k), -1);
    if (bodies.empty()) {
        result.unclaimed.resize(parts.size());
        std::iota(result.unclaimed.begin(), result.unclaimed.end(), std::size_t{0});
        return result;
    }

    // slot-contest state per (body, slot)
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> stored_conf(result.occupants.size(), 0.0);
    std::vector<double> stored_dist(result.occupants.size(), inf);

    for (std::size_t pi : sorted_by_score(parts)) {
        const Candidate& part = parts[pi];
        const int slot = part.kind;
        const double cx = part.box.cx();
        const double cy = part.box.cy();
        // nearest body by its predicted center for this slot; ties go to the
        // lowest body index (strict < keeps the first minimum)
        std::size_t best = 0;
        double best_d2 = inf;
        for (std::size_t bi = 0; bi < bodies.size(); ++bi) {
            const auto& p = bodies[bi].centers[static_cast<std::size_t>(slot)];
            const double dx = p[0] - cx;
            const double dy = p[1] - cy;
            const double d2 = dx * dx + dy * dy;
            if (d2 < best_d2) {
                best_d2 = d2;
                best = bi;
            }
        }
        const std::size_t key = best * static_cast<std::size_t>(k) + slot;
        const bool wins = config.association_mode == AssociationMode::confidence
                              ? part.score > stored_conf[key]
                              : best_d2 < stored_dist[key];
        if (wins && inner_iou(bodies[best].box, part.box) > config.inner_iou) {
            if (result.occupants[key] >= 0) {
                result.unclaimed.push_back(static_cast<std::size_t>(result.occupants[key]));
            }
            result.occupants[key] = static_cast<std::ptrdiff_t>(pi);
            stored_conf[key] = part.score;
            stored_dist[key] = best_d2;
        } else {
            result.unclaimed.push_back(pi);
        }
    }
    for (std::size_t bi = 0; bi < bodies.size(); ++bi) {
        for (int j = 0; j < k; ++j) {
            const std::ptrdiff_t pi =
                result.occupants[bi * static_cast<std::size_t>(k) + j];
            if (pi < 0) {
                continue;
            }
            const Candidate& part = parts[static_cast<std::size_t>(pi)];
            AssociatedPart ap;
            ap.box = part.box;
            ap.score = part.score;
            ap.cx = part.box.cx();
            ap.cy = part.box.cy();
            result.detections[bi].parts[static_cast<std::size_t>(j)] = ap;
        }
    }
    std::sort(result.unclaimed.begin(), result.unclaimed.end());
    return result;
}

long double_check(std::vector<AssociatedDetection>& detections, int slot) {
    if (!detections.empty() &&
        (slot < 0 || static_cast<std::size_t>(slot) >= detections.front().parts.size())) {
        throw DataError("check slot " + std::to_string(slot) + " outside the slot range");
    }
    if (slot < 0) {
        throw DataError("check slot " + std::to_string(slot) + " outside the slot range");
    }
    const auto before = detections.size();
    detections.erase(std::remove_if(detections.begin(), detections.end(),
                                    [slot](const AssociatedDetection& d) {
                                        return !d.parts[static_cast<std::size_t>(slot)];
                                    }),
                     detections.end());
    return static_cast<long>(before - detections.size());
}

std::array<double, 4> fuse_contact(const std::array<double, 4>& part_probs,
                                   const std::array<double, 4>& body_probs, double weight_part,
                                   double weight_body, std::vector<std::string>* warnings) {
    const double sum = weight_part + weight_body;
    if (sum <= 0.0 || !std::isfinite(sum)) {
        throw DataError("contact fusion weights must have a positive finite sum");
    }
    double wp = weight_part;
    double wb = weight_body;
    if (std::abs(sum - 1.0) > 1e-9) {
        wp /= sum;
        wb /= sum;
        if (warnings) {
            warnings->push_back("contact fusion weights normalized from sum " +
                                std::to_string(sum));
        }
    }
    std::array<double, 4> fused{};
    for (int s = 0; s < 4; ++s) {
        fused[static_cast<std::size_t>(s)] = wp * part_probs[static_cast<std::size_t>(s)] +
                                             wb * body_probs[static_cast<std::size_t>(s)];
    }
    return fused;
}

DetectionRecord decode_image(const std::vector<GridTensor>& grids, const GridSpec& spec,
                             const DecodeConfig& config, const std::string& image_id,
                             DecodeStats* stats) {
    config.validate(spec);
    check_grids(grids, spec);
    const ChannelLayout layout = channel_layout(spec);

    const std::vector<Candidate> all =
        extract_candidates(grids, spec, layout, config, stats);
    std::vector<Candidate> bodies;
    std::vector<Candidate> parts;
    for (const Candidate& cand : all) {
        (cand.kind == kBodyKind ? bodies : parts).push_back(cand);
    }
    bodies = nms(bodies, config.body_conf, config.body_iou, config.max_detections);
    parts = nms(parts, config.part_conf, config.part_iou, config.max_detections);
    if (stats) {
        stats->kept_bodies += static_cast<long>(bodies.size());
        stats->kept_parts += static_cast<long>(parts.size());
    }

    AssociationResult assoc = associate(bodies, parts, spec, config);

    if (spec.has_contact()) {
        for (std::size_t bi = 0; bi < assoc.detections.size(); ++bi) {
            for (int j = 0; j < spec.part_count; ++j) {
                auto& slot_ref = assoc.detections[bi].parts[static_cast<std::size_t>(j)];
                if (!slot_ref) {
                    continue;
                }
                int group = -1;
                for (int g = 0; g < 2; ++g) {
                    if (spec.contact_slots[static_cast<std::size_t>(g)] == j) {
                        group = g;
                        break;
                    }
                }
                if (group < 0) {
                    continue;
                }
                const std::ptrdiff_t pi =
                    assoc.occupants[bi * static_cast<std::size_t>(spec.part_count) + j];
                const Candidate& part = parts[static_cast<std::size_t>(pi)];
                if (!part.contact || !bodies[bi].contact) {
                    continue;
                }
                slot_ref->contact_scores = fuse_contact(
                    (*part.contact)[static_cast<std::size_t>(group)],
                    (*bodies[bi].contact)[static_cast<std::size_t>(group)],
                    config.contact_weight_part, config.contact_weight_body,
                    stats ? &stats->warnings : nullptr);
            }
        }
    }

    DetectionRecord record;
    record.image_id = image_id;
    record.bodies = std::move(assoc.detections);
    long claimed = 0;
    for (const auto& det : record.bodies) {
        for (const auto& p : det.parts) {
            if (p) ++claimed;
        }
    }
    if (stats) stats->associated_parts += claimed;

    if (config.require_association) {
        const long dropped = double_check(record.bodies, *config.require_association);
        if (stats) {
            stats->dropped_bodies += dropped;
            stats->dropped_parts += static_cast<long>(assoc.unclaimed.size());
        }
    } else {
        for (std::size_t pi : assoc.unclaimed) {
            UnassociatedPart up;
            up.slot = parts[pi].kind;
            up.box = parts[pi].box;
            up.score = parts[pi].score;
            record.extra_parts.push_back(up);
        }
        std::stable_sort(record.extra_parts.begin(), record.extra_parts.end(),
                         [](const UnassociatedPart& a, const UnassociatedPart& b) {
                             return a.slot < b.slot;
                         });
    }
    return record;
}

}  // namespace bpj
