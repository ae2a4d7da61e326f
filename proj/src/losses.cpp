#include "bpj/losses.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "bpj/assigner.hpp"
#include "bpj/geometry.hpp"
#include "bpj/transforms.hpp"

namespace bpj {

namespace {

constexpr double kBceClamp = 1e-12;

/// Decoded pred/target boxes for one matched cell, in grid units relative to
/// the same cell origin (only relative placement matters for CIoU).
struct CellBoxes {
    Box pred;
    Box target;
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

/// Box decode for one anchor-based cell directly from the channel values
/// (pred: raw; target: raw as written by the assigner).
Box decode_box(const GridTensor& t, const ChannelLayout& layout, const GridSpec& spec,
               std::size_t stride_index, int anchor, int row, int col) {
    const auto& prior = spec.anchors[stride_index][anchor];
    const double stride = spec.strides[stride_index];
    const double aw = prior.w / stride;
    const double ah = prior.h / stride;
    const double cx = 2.0 * sigmoid(t.at(anchor, layout.box + 0, row, col)) - 0.5;
    const double cy = 2.0 * sigmoid(t.at(anchor, layout.box + 1, row, col)) - 0.5;
    const double sw = 2.0 * sigmoid(t.at(anchor, layout.box + 2, row, col));
    const double sh = 2.0 * sigmoid(t.at(anchor, layout.box + 3, row, col));
    return Box::from_center(cx, cy, sw * sw * aw, sh * sh * ah);
}

/// Anchor-free box from side distances around the cell center; sides are
/// floored at a tiny epsilon so degenerate predictions stay comparable
/// instead of erroring inside CIoU.
Box decode_box_free(const GridTensor& t, const ChannelLayout& layout, int row, int col) {
    constexpr double kMinSide = 1e-6;
    const double l = std::max<double>(t.at(0, layout.box + 0, row, col), kMinSide);
    const double tp = std::max<double>(t.at(0, layout.box + 1, row, col), kMinSide);
    const double r = std::max<double>(t.at(0, layout.box + 2, row, col), kMinSide);
    const double b = std::max<double>(t.at(0, layout.box + 3, row, col), kMinSide);
    const double px = col + 0.5;
    const double py = row + 0.5;
    return Box{px - l, py - tp, px + r, py + b};
}

}  // namespace

double bce(double p, double t) {
    p = std::clamp(p, kBceClamp, 1.0 - kBceClamp);
    return -(t * std::log(p) + (1.0 - t) * std::log1p(-p));
}

void LossConfig::validate(const GridSpec& spec) const {
    auto check = [](double v, const char* name) {
        if (v < 0.0 || !std::isfinite(v)) {
            throw DataError(std::string("loss config: weight ") + name +
                            " must be non-negative");
        }
    };
    check(alpha, "alpha");
    check(beta, "beta");
    check(gamma, "gamma");
    check(lambda, "lambda");
    check(mu, "mu");
    check(alpha_free, "alpha_free");
    check(gamma_free, "gamma_free");
    if (lambda_free) {
        check(*lambda_free, "lambda_free");
    }
    for (double w : stride_weights) {
        check(w, "stride_weights");
    }
    if (batch_size <= 0) {
        throw DataError("loss config: batch_size must be positive");
    }
    if (stride_weights.size() < spec.strides.size()) {
        throw DataError("loss config: " + std::to_string(stride_weights.size()) +
                        " stride weights for " + std::to_string(spec.strides.size()) +
                        " strides");
    }
}

LossReport compute_losses(const std::vector<GridTensor>& pred,
                          const std::vector<GridTensor>& target, const GridSpec& spec,
                          const LossConfig& config) {
    spec.validate();
    config.validate(spec);
    if (pred.size() != spec.strides.size() || target.size() != spec.strides.size()) {
        throw DataError("compute_losses: tensor count does not match the spec's strides");
    }
    const ChannelLayout layout = channel_layout(spec);
    const int k = spec.part_count;
    const bool has_obj = spec.has_objectness();
    const bool has_cts = spec.has_contact();

    LossReport report;
    long long matched_total = 0, offset_total = 0, contact_total = 0;

    for (std::size_t si = 0; si < spec.strides.size(); ++si) {
        const GridTensor& p = pred[si];
        const GridTensor& t = target[si];
        if (p.values.size() != t.values.size() || p.stride != t.stride) {
            throw DataError("compute_losses: pred/target shape mismatch at stride " +
                            std::to_string(spec.strides[si]));
        }
        StrideLoss sl;
        sl.stride = spec.strides[si];

        double box_sum = 0.0, obj_sum = 0.0, cls_sum = 0.0, bpd_sum = 0.0, cts_sum = 0.0;
        for (int a = 0; a < t.anchors; ++a) {
            for (int r = 0; r < t.height; ++r) {
                for (int c = 0; c < t.width; ++c) {
                    ++sl.total_cells;
                    const bool matched = cell_matched(t, layout, a, r, c);
                    double obj_target = 0.0;
                    if (matched) {
                        ++sl.matched_cells;
                        Box pb, tb;
                        if (spec.variant == Variant::anchor_free) {
                            pb = decode_box_free(p, layout, r, c);
                            tb = decode_box_free(t, layout, r, c);
                        } else {
                            pb = decode_box(p, layout, spec, si, a, r, c);
                            tb = decode_box(t, layout, spec, si, a, r, c);
                        }
                        const double quality = ciou(pb, tb);
                        box_sum += 1.0 - quality;
                        obj_target = config.obj_target_mode == ObjTargetMode::binary
                                         ? 1.0
                                         : clamp01(quality);

                        double cls_cell = 0.0;
                        for (int cc = 0; cc <= k; ++cc) {
                            const double prob = sigmoid(p.at(a, layout.cls_channel(cc), r, c));
                            cls_cell += bce(prob, t.at(a, layout.cls_channel(cc), r, c));
                        }
                        cls_sum += cls_cell / (k + 1);

                        for (int j = 0; j < k; ++j) {
                            const float tx = t.at(a, layout.offset_x(j), r, c);
                            if (std::isnan(tx)) {
                                continue;
                            }
                            const float ty = t.at(a, layout.offset_y(j), r, c);
                            const double dx = p.at(a, layout.offset_x(j), r, c) - tx;
                            const double dy = p.at(a, layout.offset_y(j), r, c) - ty;
                            bpd_sum += dx * dx + dy * dy;
                            ++sl.offset_pairs;
                        }

                        if (has_cts) {
                            for (int g = 0; g < 2; ++g) {
                                if (std::isnan(t.at(a, layout.contact_channel(g, 0), r, c))) {
                                    continue;
                                }
                                ++sl.contact_groups;
                                for (int s = 0; s < 4; ++s) {
                                    const float state =
                                        t.at(a, layout.contact_channel(g, s), r, c);
                                    if (state == 2.0f) {
                                        continue;  // unsure states are not penalized
                                    }
                                    const double prob =
                                        sigmoid(p.at(a, layout.contact_channel(g, s), r, c));
                                    cts_sum += bce(prob, state);
                                }
                            }
                        }
                    }
                    if (has_obj) {
                        const double prob = sigmoid(p.at(a, layout.obj, r, c));
                        obj_sum += bce(prob, obj_target);
                    }
                }
            }
        }

        if (sl.matched_cells > 0) {
            sl.box = box_sum / sl.matched_cells;
            sl.cls = cls_sum / sl.matched_cells;
        }
        if (has_obj && sl.total_cells > 0) {
            sl.obj = config.stride_weights[si] * (obj_sum / sl.total_cells);
        }
        if (sl.offset_pairs > 0) {
            sl.bpd = bpd_sum / sl.offset_pairs;
        }
        if (sl.contact_groups > 0) {
            sl.cts = cts_sum / sl.contact_groups;
        }
        report.box += sl.box;
        report.obj += sl.obj;
        report.cls += sl.cls;
        report.bpd += sl.bpd;
        report.cts += sl.cts;
        matched_total += sl.matched_cells;
        offset_total += sl.offset_pairs;
        contact_total += sl.contact_groups;
        report.per_stride.push_back(sl);
    }

    report.box_empty = matched_total == 0;
    report.cls_empty = matched_total == 0;
    report.bpd_empty = offset_total == 0;
    report.cts_empty = contact_total == 0;
    report.total = loss_total(report.box, report.obj, report.cls, report.bpd, report.cts, spec,
                              config);
    return report;
}

double loss_total(double box, double obj, double cls, double bpd, double cts,
                  const GridSpec& spec, const LossConfig& config) {
    config.validate(spec);
    double sum;
    if (spec.variant == Variant::anchor_free) {
        sum = config.alpha_free * box + config.gamma_free * cls +
              config.resolved_lambda_free(spec.part_count) * bpd;
    } else {
        sum = config.alpha * box + config.beta * obj + config.gamma * cls + config.lambda * bpd;
        if (spec.has_contact()) {
            sum += config.mu * cts;
        }
    }
    return config.batch_size * sum;
}

double loss_box(const std::vector<GridTensor>& pred, const std::vector<GridTensor>& target,
                const GridSpec& spec, const LossConfig& config) {
    return compute_losses(pred, target, spec, config).box;
}
double loss_obj(const std::vector<GridTensor>& pred, const std::vector<GridTensor>& target,
                const GridSpec& spec, const LossConfig& config) {
    return compute_losses(pred, target, spec, config).obj;
}
double loss_cls(const std::vector<GridTensor>& pred, const std::vector<GridTensor>& target,
                const GridSpec& spec, const LossConfig& config) {
    return compute_losses(pred, target, spec, config).cls;
}
double loss_bpd(const std::vector<GridTensor>& pred, const std::vector<GridTensor>& target,
                const GridSpec& spec, const LossConfig& config) {
    return compute_losses(pred, target, spec, config).bpd;
}
double loss_cts(const std::vector<GridTensor>& pred, const std::vector<GridTensor>& target,
                const GridSpec& spec, const LossConfig& config) {
    if (!spec.has_contact()) {
        throw DataError("loss_cts: spec variant has no contact channels");
    }
    return compute_losses(pred, target, spec, config).cts;
}

nlohmann::json loss_report_to_json(const LossReport& report, const GridSpec& spec,
                                   const LossConfig& config) {
    nlohmann::json j;
    j["components"] = {{"box", report.box},
                       {"obj", report.obj},
                       {"cls", report.cls},
                       {"bpd", report.bpd},
                       {"cts", report.cts}};
    j["total"] = report.total;
    j["empty"] = {{"box", report.box_empty},
                  {"cls", report.cls_empty},
                  {"bpd", report.bpd_empty},
                  {"cts", report.cts_empty}};
    nlohmann::json strides = nlohmann::json::array();
    for (const auto& sl : report.per_stride) {
        strides.push_back({{"stride", sl.stride},
                           {"box", sl.box},
                           {"obj", sl.obj},
                           {"cls", sl.cls},
                           {"bpd", sl.bpd},
                           {"cts", sl.cts},
                           {"matched_cells", sl.matched_cells},
                           {"total_cells", sl.total_cells},
                           {"offset_pairs", sl.offset_pairs},
                           {"contact_groups", sl.contact_groups}});
    }
    j["per_stride"] = strides;
    nlohmann::json cfg;
    if (spec.variant == Variant::anchor_free) {
        cfg["alpha_free"] = config.alpha_free;
        cfg["gamma_free"] = config.gamma_free;
        cfg["lambda_free"] = config.resolved_lambda_free(spec.part_count);
    } else {
        cfg["alpha"] = config.alpha;
        cfg["beta"] = config.beta;
        cfg["gamma"] = config.gamma;
        cfg["lambda"] = config.lambda;
        if (spec.has_contact()) {
            cfg["mu"] = config.mu;
        }
        cfg["stride_weights"] = config.stride_weights;
        cfg["obj_target_mode"] =
            config.obj_target_mode == ObjTargetMode::ciou ? "ciou" : "binary";
    }
    cfg["batch_size"] = config.batch_size;
    j["config"] = cfg;
    return j;
}

}  // namespace bpj
