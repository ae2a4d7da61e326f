#include "bpj/assigner.hpp"

#include <cmath>
#include <limits>

namespace bpj {

namespace {

constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();

/// An object to be written into the grids: a body, or one visible part.
struct PendingObject {
    int body_index = 0;
    int kind = kBodyKind;
    Box box;  // pixels
    /// Offset target points in pixels, one per slot (body objects: visible
    /// part centers; part objects: the body center in the object's own slot).
    std::vector<Offset> points;
    /// Contact channel targets (state in {0,1,2}) or NaN where unannotated.
    /// Only meaningful for the contact variant and body objects.
    std::array<std::array<float, 4>, 2> contact{};
    bool has_contact = false;
};

struct Cell {
    int x = 0;
    int y = 0;
};

/// Base cell plus the configured neighbour cells for a center given in grid
/// units. Only in-bounds cells are returned; the base cell comes first.
void responsible_cells(double gx, double gy, int grid_w, int grid_h, int neighbor_cells,
                       std::vector<Cell>& out) {
    out.clear();
    const int bx = static_cast<int>(std::floor(gx));
    const int by = static_cast<int>(std::floor(gy));
    if (bx < 0 || bx >= grid_w || by < 0 || by >= grid_h) {
        return;  // center outside the grid (cannot happen for validated scenes)
    }
    out.push_back({bx, by});
    if (neighbor_cells < 2) {
        return;
    }
    const double fx = gx - bx;
    const double fy = gy - by;
    const int nx = fx < 0.5 ? bx - 1 : bx + 1;
    const int ny = fy < 0.5 ? by - 1 : by + 1;
    if (nx >= 0 && nx < grid_w) {
        out.push_back({nx, by});
    }
    if (ny >= 0 && ny < grid_h) {
        out.push_back({bx, ny});
    }
    if (neighbor_cells >= 4) {
        // Opposite-side neighbours can only represent the center when the
        // fraction sits exactly on the 0.5 boundary (center-to-origin
        // distance 1.5, the closed edge of the representable range).
        if (fx == 0.5) {
            const int ox = bx - 1;
            if (ox >= 0 && ox < grid_w) {
                out.push_back({ox, by});
            }
        }
        if (fy == 0.5) {
            const int oy = by - 1;
            if (oy >= 0 && oy < grid_h) {
                out.push_back({bx, oy});
            }
        }
    }
}

int class_index(int kind) { return kind == kBodyKind ? 0 : kind + 1; }

}  // namespace

bool anchor_match(double gt_w, double gt_h, const Anchor& anchor, double ratio_max) {
    if (gt_w <= 0.0 || gt_h <= 0.0 || anchor.w <= 0.0 || anchor.h <= 0.0) {
        throw DataError("anchor_match: non-positive dimension (object " + std::to_string(gt_w) +
                        "x" + std::to_string(gt_h) + ", anchor " + std::to_string(anchor.w) +
                        "x" + std::to_string(anchor.h) + ")");
    }
    const double rw = std::max(gt_w / anchor.w, anchor.w / gt_w);
    const double rh = std::max(gt_h / anchor.h, anchor.h / gt_h);
    return rw < ratio_max && rh < ratio_max;
}

bool cell_matched(const GridTensor& tensor, const ChannelLayout& layout, int anchor, int row,
                  int col) {
    if (layout.obj >= 0) {
        return tensor.at(anchor, layout.obj, row, col) == 1.0f;
    }
    return !std::isnan(tensor.at(anchor, layout.box, row, col));
}

AssignResult assign(const Scene& scene, const GridSpec& spec, const AssignConfig& config) {
    scene.validate(spec);
    if (config.neighbor_cells != 0 && config.neighbor_cells != 2 && config.neighbor_cells != 4) {
        throw DataError("assign: neighbor_cells must be 0, 2 or 4");
    }
    const ChannelLayout layout = channel_layout(spec);
    const int k = spec.part_count;

    AssignResult result;
    result.targets.reserve(spec.strides.size());
    for (int stride : spec.strides) {
        GridTensor t = GridTensor::zeros(spec, stride);
        // all channels start as "no target"; the objectness indicator (when
        // present) starts at 0
        for (auto& v : t.values) {
            v = kNaN;
        }
        if (layout.obj >= 0) {
            for (int a = 0; a < t.anchors; ++a) {
                for (int r = 0; r < t.height; ++r) {
                    for (int c = 0; c < t.width; ++c) {
                        t.at(a, layout.obj, r, c) = 0.0f;
                    }
                }
            }
        }
        result.targets.push_back(std::move(t));
    }

    // Flatten the scene into write-ordered objects: each body, then its
    // visible parts in slot order.
    std::vector<PendingObject> objects;
    for (std::size_t bi = 0; bi < scene.bodies.size(); ++bi) {
        const auto& body = scene.bodies[bi];
        PendingObject body_obj;
        body_obj.body_index = static_cast<int>(bi);
        body_obj.kind = kBodyKind;
        body_obj.box = body.box;
        body_obj.points.resize(k);
        for (auto& row : body_obj.contact) {
            row.fill(kNaN);
        }
        for (int j = 0; j < k; ++j) {
            const auto& part = body.parts[j];
            if (part && part->visible) {
                body_obj.points[j] = Offset{part->box.cx(), part->box.cy(), true};
            }
        }
        if (spec.has_contact()) {
            body_obj.has_contact = true;
            for (int g = 0; g < 2; ++g) {
                const int slot = spec.contact_slots[g];
                const auto& part = body.parts[slot];
                if (part && part->visible && part->contact) {
                    for (int s = 0; s < 4; ++s) {
                        body_obj.contact[g][s] = static_cast<float>((*part->contact)[s]);
                    }
                }
            }
        }
        objects.push_back(std::move(body_obj));

        for (int j = 0; j < k; ++j) {
            const auto& part = body.parts[j];
            if (!part || !part->visible) {
                continue;
            }
            PendingObject part_obj;
            part_obj.body_index = static_cast<int>(bi);
            part_obj.kind = j;
            part_obj.box = part->box;
            part_obj.points.resize(k);
            part_obj.points[j] = Offset{body.box.cx(), body.box.cy(), true};
            for (auto& row : part_obj.contact) {
                row.fill(kNaN);
            }
            objects.push_back(std::move(part_obj));
        }
    }

    std::vector<Cell> cells;
    for (const auto& obj : objects) {
        const double w = obj.box.width();
        const double h = obj.box.height();
        if (w < config.min_size || h < config.min_size) {
            ++result.stats.skipped_objects;
            result.warnings.push_back(
                "skipped " +
                (obj.kind == kBodyKind ? std::string("body")
                                       : "part slot " + std::to_string(obj.kind)) +
                " of body " + scene.bodies[obj.body_index].body_id + ": size " +
                std::to_string(w) + "x" + std::to_string(h) + " below " +
                std::to_string(config.min_size) + "px");
            continue;
        }

        bool matched_any = false;
        for (std::size_t si = 0; si < spec.strides.size(); ++si) {
            const int stride = spec.strides[si];
            GridTensor& tensor = result.targets[si];
            const double gx = obj.box.cx() / stride;
            const double gy = obj.box.cy() / stride;

            if (spec.variant == Variant::anchor_free) {
                // Center-cell assignment: one location per stride, used only
                // when the cell-center anchor point lies strictly inside the
                // box.
                const int bx = static_cast<int>(std::floor(gx));
                const int by = static_cast<int>(std::floor(gy));
                if (bx < 0 || bx >= tensor.width || by < 0 || by >= tensor.height) {
                    continue;
                }
                const double px = bx + 0.5;
                const double py = by + 0.5;
                const Box grid_box{obj.box.x1 / stride, obj.box.y1 / stride,
                                   obj.box.x2 / stride, obj.box.y2 / stride};
                if (!(grid_box.x1 < px && px < grid_box.x2 && grid_box.y1 < py &&
                      py < grid_box.y2)) {
                    continue;
                }
                matched_any = true;
                if (cell_matched(tensor, layout, 0, by, bx)) {
                    ++result.stats.collisions;
                }

                ExtendedObject target;
                target.kind = obj.kind;
                target.box = grid_box;
                target.class_scores.assign(k + 1, 0.0);
                target.offsets.resize(k);
                for (int j = 0; j < k; ++j) {
                    if (!obj.points[j].set) {
                        continue;
                    }
                    const double dx = obj.points[j].x / stride - px;
                    const double dy = obj.points[j].y / stride - py;
                    if (std::abs(dx) >= 2.0 || std::abs(dy) >= 2.0) {
                        ++result.stats.dropped_offsets;
                        continue;
                    }
                    target.offsets[j] = Offset{dx, dy, true};
                }
                const auto raw = encode_targets_free(target, spec, layout, px, py);
                for (int c = 0; c < 4; ++c) {
                    tensor.at(0, layout.box + c, by, bx) = static_cast<float>(raw[layout.box + c]);
                }
                for (int c = 0; c <= k; ++c) {
                    tensor.at(0, layout.cls_channel(c), by, bx) =
                        c == class_index(obj.kind) ? 1.0f : 0.0f;
                }
                for (int j = 0; j < k; ++j) {
                    const bool set = target.offsets[j].set;
                    tensor.at(0, layout.offset_x(j), by, bx) =
                        set ? static_cast<float>(raw[layout.offset_x(j)]) : kNaN;
                    tensor.at(0, layout.offset_y(j), by, bx) =
                        set ? static_cast<float>(raw[layout.offset_y(j)]) : kNaN;
                }
                result.matches.push_back({obj.body_index, obj.kind, stride, 0, bx, by});
                continue;
            }

            for (std::size_t ai = 0; ai < spec.anchors[si].size(); ++ai) {
                const Anchor& anchor = spec.anchors[si][ai];
                if (!anchor_match(w, h, anchor, config.anchor_ratio_max)) {
                    continue;
                }
                responsible_cells(gx, gy, tensor.width, tensor.height, config.neighbor_cells,
                                  cells);
                const double bound_x = offset_bound(spec, stride, static_cast<int>(ai), true);
                const double bound_y = offset_bound(spec, stride, static_cast<int>(ai), false);
                bool base_cell = true;
                for (const Cell& cell : cells) {
                    matched_any = true;
                    if (cell_matched(tensor, layout, static_cast<int>(ai), cell.y, cell.x)) {
                        ++result.stats.collisions;
                    }

                    ExtendedObject target;
                    target.kind = obj.kind;
                    target.box = Box{obj.box.x1 / stride - cell.x, obj.box.y1 / stride - cell.y,
                                     obj.box.x2 / stride - cell.x, obj.box.y2 / stride - cell.y};
                    target.objectness = 1.0;
                    target.class_scores.assign(k + 1, 0.0);
                    target.offsets.resize(k);
                    const bool write_offsets = base_cell || config.offsets_at_neighbors;
                    if (write_offsets) {
                        for (int j = 0; j < k; ++j) {
                            if (!obj.points[j].set) {
                                continue;
                            }
                            const double dx = obj.points[j].x / stride - cell.x;
                            const double dy = obj.points[j].y / stride - cell.y;
                            if (std::abs(dx) >= bound_x || std::abs(dy) >= bound_y) {
                                ++result.stats.dropped_offsets;
                                continue;
                            }
                            target.offsets[j] = Offset{dx, dy, true};
                        }
                    }
                    const auto raw =
                        encode_targets(target, spec, layout, stride, static_cast<int>(ai));

                    const int a = static_cast<int>(ai);
                    tensor.at(a, layout.obj, cell.y, cell.x) = 1.0f;
                    for (int c = 0; c < 4; ++c) {
                        tensor.at(a, layout.box + c, cell.y, cell.x) =
                            static_cast<float>(raw[layout.box + c]);
                    }
                    for (int c = 0; c <= k; ++c) {
                        tensor.at(a, layout.cls_channel(c), cell.y, cell.x) =
                            c == class_index(obj.kind) ? 1.0f : 0.0f;
                    }
                    for (int j = 0; j < k; ++j) {
                        const bool set = target.offsets[j].set;
                        tensor.at(a, layout.offset_x(j), cell.y, cell.x) =
                            set ? static_cast<float>(raw[layout.offset_x(j)]) : kNaN;
                        tensor.at(a, layout.offset_y(j), cell.y, cell.x) =
                            set ? static_cast<float>(raw[layout.offset_y(j)]) : kNaN;
                    }
                    if (layout.contact >= 0) {
                        for (int g = 0; g < 2; ++g) {
                            for (int s = 0; s < 4; ++s) {
                                tensor.at(a, layout.contact_channel(g, s), cell.y, cell.x) =
                                    obj.has_contact ? obj.contact[g][s] : kNaN;
                            }
                        }
                    }
                    result.matches.push_back(
                        {obj.body_index, obj.kind, stride, a, cell.x, cell.y});
                    base_cell = false;
                }
            }
        }
        if (!matched_any) {
            ++result.stats.unmatched_objects;
        }
    }
    return result;
}

}  // namespace bpj
