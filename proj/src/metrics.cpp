#include "bpj/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace bpj {

namespace {

/// Floor applied to miss rates inside the log average; a final value at or
/// below ten times the floor collapses to an exact 0 (perfect detector).
constexpr double kMissRateFloor = 1e-10;

bool box_less(const Box& a, const Box& b) {
    if (a.x1 != b.x1) return a.x1 < b.x1;
    if (a.y1 != b.y1) return a.y1 < b.y1;
    if (a.x2 != b.x2) return a.x2 < b.x2;
    return a.y2 < b.y2;
}

/// Canonical ranking: score descending, then image, then coordinates, so a
/// permutation of the input never changes any downstream result.
void sort_canonical(std::vector<DetBox>& dets) {
    std::sort(dets.begin(), dets.end(), [](const DetBox& a, const DetBox& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.image != b.image) return a.image < b.image;
        return box_less(a.box, b.box);
    });
}

template <typename T, typename BoxOf>
std::unordered_map<int, std::vector<std::size_t>> group_by_image(const std::vector<T>& items,
                                                                 BoxOf) {
    std::unordered_map<int, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out[items[i].image].push_back(i);
    }
    return out;
}

/// Greedy one-to-one matching: the detection takes the highest-IoU unmatched
/// ground truth of its image at or above the threshold (ties keep the lowest
/// annotation index). Returns -1 when nothing matches.
template <typename Gt>
int match_greedy(const Box& det, int image, const std::vector<Gt>& gts,
                 const std::unordered_map<int, std::vector<std::size_t>>& gt_by_image,
                 std::vector<char>& taken, double threshold) {
    const auto it = gt_by_image.find(image);
    if (it == gt_by_image.end()) return -1;
    double best_iou = -1.0;
    int best = -1;
    for (const std::size_t gi : it->second) {
        if (taken[gi]) continue;
        const double v = iou(det, gts[gi].box);
        if (v < threshold) continue;
        if (v > best_iou) {  // strictly-better keeps the lowest index on ties
            best_iou = v;
            best = static_cast<int>(gi);
        }
    }
    if (best >= 0) taken[static_cast<std::size_t>(best)] = 1;
    return best;
}

/// Builds the AP result from ranked detections and per-rank true-positive
/// flags. `boundaries[i]` marks the last detection of a ranking-equivalence
/// group; each group closes one PR point, so reordering within a group can
/// never change the result. When null, groups are runs of equal score.
ApResult ap_result_from(const std::vector<DetBox>& sorted, const std::vector<char>& tp,
                        long npos, const std::vector<char>* boundaries = nullptr) {
    ApResult result;
    result.positives = npos;
    result.detections = static_cast<long>(sorted.size());

    // threshold-level counts: one entry per ranking group
    std::vector<long> tp_at;
    long tp_cum = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        tp_cum += tp[i];
        const bool boundary = boundaries
                                  ? (*boundaries)[i] != 0
                                  : i + 1 == sorted.size() ||
                                        sorted[i + 1].score != sorted[i].score;
        if (!boundary) continue;
        tp_at.push_back(tp_cum);
        PrPoint p;
        p.score = sorted[i].score;
        p.recall = npos > 0 ? static_cast<double>(tp_cum) / npos : 0.0;
        p.precision = static_cast<double>(tp_cum) / static_cast<double>(i + 1);
        result.curve.push_back(p);
    }
    result.true_positives = tp_cum;
    result.final_precision =
        sorted.empty() ? 0.0
                       : static_cast<double>(tp_cum) / static_cast<double>(sorted.size());

    if (npos > 0) {
        // all-point interpolation: integrate the backwards precision envelope
        // against integer true-positive increments, dividing by the positive
        // count once (a perfect detector thus reports exactly 1)
        double weighted = 0.0;
        double envelope = 0.0;
        for (std::size_t i = tp_at.size(); i-- > 0;) {
            envelope = std::max(envelope, result.curve[i].precision);
            const long prev_tp = i == 0 ? 0 : tp_at[i - 1];
            weighted += static_cast<double>(tp_at[i] - prev_tp) * envelope;
        }
        result.ap = weighted / static_cast<double>(npos);
    }
    return result;
}

/// Samples a per-threshold (fppi, miss rate) step curve on the protocol's
/// grid and log-averages. Each grid value uses the largest prefix whose FPPI
/// does not exceed it; the empty prefix (miss rate 1) is always attainable.
MrResult log_average(const std::vector<std::array<double, 2>>& curve,
                     const MatchProtocol& protocol, bool has_gt) {
    MrResult result;
    result.curve = curve;
    if (!has_gt) {
        return result;
    }
    double log_sum = 0.0;
    for (const double f : protocol.fppi_grid()) {
        double rate = 1.0;
        for (const auto& point : curve) {
            if (point[0] <= f) {
                rate = point[1];  // later prefixes win: the curve is in
                                  // threshold-descending order
            }
        }
        result.sampled.push_back(rate);
        log_sum += std::log(std::max(rate, kMissRateFloor));
    }
    double value = std::exp(log_sum / static_cast<double>(result.sampled.size()));
    if (value <= 10.0 * kMissRateFloor) {
        value = 0.0;
    }
    result.value = value;
    return result;
}

double pair_rank_score(const DetPair& p, PairScoreMode mode) {
    switch (mode) {
        case PairScoreMode::body: return p.body_score;
        case PairScoreMode::min_body_part: return std::min(p.body_score, p.part_score);
        case PairScoreMode::part: return p.part_score;
    }
    return p.body_score;
}

void sort_pairs(std::vector<DetPair>& pairs, PairScoreMode mode) {
    std::sort(pairs.begin(), pairs.end(), [mode](const DetPair& a, const DetPair& b) {
        const double sa = pair_rank_score(a, mode);
        const double sb = pair_rank_score(b, mode);
        if (sa != sb) return sa > sb;
        if (a.image != b.image) return a.image < b.image;
        if (a.part_score != b.part_score) return a.part_score > b.part_score;
        if (box_less(a.part, b.part)) return true;
        if (box_less(b.part, a.part)) return false;
        return box_less(a.body, b.body);
    });
}

nlohmann::json number_or_null(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

nlohmann::json ap_to_json(const ApResult& r) {
    nlohmann::json j;
    j["ap"] = number_or_null(r.ap);
    j["positives"] = r.positives;
    j["detections"] = r.detections;
    j["true_positives"] = r.true_positives;
    j["final_precision"] = r.final_precision;
    auto curve = nlohmann::json::array();
    for (const auto& p : r.curve) {
        curve.push_back({p.score, p.recall, p.precision});
    }
    j["pr_curve"] = curve;
    return j;
}

nlohmann::json mr_to_json(const MrResult& r) {
    nlohmann::json j;
    j["value"] = number_or_null(r.value);
    auto curve = nlohmann::json::array();
    for (const auto& p : r.curve) {
        curve.push_back({p[0], p[1]});
    }
    j["fppi_curve"] = curve;
    j["sampled"] = r.sampled;
    return j;
}

}  // namespace

std::vector<double> MatchProtocol::fppi_grid() const {
    validate();
    std::vector<double> grid;
    const double lo = std::log10(fppi_min);
    const double hi = std::log10(fppi_max);
    for (int i = 0; i < fppi_samples; ++i) {
        const double t = fppi_samples == 1
                             ? 0.0
                             : static_cast<double>(i) / (fppi_samples - 1);
        grid.push_back(std::pow(10.0, lo + t * (hi - lo)));
    }
    return grid;
}

void MatchProtocol::validate() const {
    if (!(iou_threshold > 0.0) || !(iou_threshold < 1.0)) {
        throw DataError("match protocol: iou_threshold must lie in (0, 1)");
    }
    if (fppi_samples < 2) {
        throw DataError("match protocol: need at least 2 FPPI sampling points");
    }
    if (!(fppi_min > 0.0) || !(fppi_max > fppi_min)) {
        throw DataError("match protocol: FPPI range must be positive and increasing");
    }
}

std::string pair_score_mode_name(PairScoreMode mode) {
    switch (mode) {
        case PairScoreMode::body: return "body";
        case PairScoreMode::min_body_part: return "min";
        case PairScoreMode::part: return "part";
    }
    return "body";
}

PairScoreMode pair_score_mode_from_name(const std::string& name) {
    if (name == "body") return PairScoreMode::body;
    if (name == "min") return PairScoreMode::min_body_part;
    if (name == "part") return PairScoreMode::part;
    throw DataError("unknown pair score mode '" + name + "' (body, min, part)");
}

ApResult voc_ap(std::vector<DetBox> detections, const std::vector<GtBox>& gts,
                const MatchProtocol& protocol) {
    protocol.validate();
    sort_canonical(detections);
    const auto gt_by_image = group_by_image(gts, 0);
    std::vector<char> taken(gts.size(), 0);
    std::vector<char> tp(detections.size(), 0);
    for (std::size_t i = 0; i < detections.size(); ++i) {
        const int m = match_greedy(detections[i].box, detections[i].image, gts, gt_by_image,
                                   taken, protocol.iou_threshold);
        tp[i] = m >= 0;
    }
    return ap_result_from(detections, tp, static_cast<long>(gts.size()));
}

MrResult mr2(std::vector<DetBox> detections, const std::vector<GtBox>& gts, int n_images,
             const MatchProtocol& protocol) {
    protocol.validate();
    if (n_images <= 0) {
        throw DataError("mr2: n_images must be positive");
    }
    sort_canonical(detections);
    const auto gt_by_image = group_by_image(gts, 0);
    std::vector<char> taken(gts.size(), 0);
    std::vector<std::array<double, 2>> curve;
    long tp_cum = 0;
    long fp_cum = 0;
    for (std::size_t i = 0; i < detections.size(); ++i) {
        const int m = match_greedy(detections[i].box, detections[i].image, gts, gt_by_image,
                                   taken, protocol.iou_threshold);
        if (m >= 0) {
            ++tp_cum;
        } else {
            ++fp_cum;
        }
        const bool boundary =
            i + 1 == detections.size() || detections[i + 1].score != detections[i].score;
        if (boundary && !gts.empty()) {
            curve.push_back({static_cast<double>(fp_cum) / n_images,
                             1.0 - static_cast<double>(tp_cum) / static_cast<double>(gts.size())});
        }
    }
    return log_average(curve, protocol, !gts.empty());
}

MrResult mmr2(std::vector<DetPair> pairs, const std::vector<GtBox>& gt_bodies,
              const std::vector<std::optional<Box>>& gt_body_parts, int n_images,
              const MatchProtocol& protocol, PairScoreMode mode) {
    protocol.validate();
    if (n_images <= 0) {
        throw DataError("mmr2: n_images must be positive");
    }
    if (gt_bodies.size() != gt_body_parts.size()) {
        throw DataError("mmr2: gt_bodies and gt_body_parts must run parallel");
    }
    long gt_pairs = 0;
    for (const auto& p : gt_body_parts) {
        if (p) ++gt_pairs;
    }
    sort_pairs(pairs, mode);
    const auto gt_by_image = group_by_image(gt_bodies, 0);
    std::vector<char> taken(gt_bodies.size(), 0);
    std::vector<std::array<double, 2>> curve;
    long body_matched = 0;  // N_p
    long pair_matched = 0;  // N_mp
    long fp_pairs = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const DetPair& pair = pairs[i];
        const int m = match_greedy(pair.body, pair.image, gt_bodies, gt_by_image, taken,
                                   protocol.iou_threshold);
        if (m >= 0) {
            ++body_matched;
            const auto& gt_part = gt_body_parts[static_cast<std::size_t>(m)];
            if (gt_part && iou(pair.part, *gt_part) >= protocol.iou_threshold) {
                ++pair_matched;
            }
        } else {
            ++fp_pairs;
        }
        const bool boundary = i + 1 == pairs.size() ||
                              pair_rank_score(pairs[i + 1], mode) != pair_rank_score(pair, mode);
        if (boundary && gt_pairs > 0) {
            const double mmr =
                body_matched > 0
                    ? 1.0 - static_cast<double>(pair_matched) / static_cast<double>(body_matched)
                    : 1.0;
            curve.push_back({static_cast<double>(fp_pairs) / n_images, mmr});
        }
    }
    return log_average(curve, protocol, gt_pairs > 0);
}

ApResult joint_ap(std::vector<DetPair> pairs, const std::vector<GtPair>& gt_pairs,
                  const MatchProtocol& protocol) {
    protocol.validate();
    sort_pairs(pairs, PairScoreMode::part);
    const auto gt_by_image = group_by_image(gt_pairs, 0);
    std::vector<char> taken(gt_pairs.size(), 0);
    std::vector<char> tp(pairs.size(), 0);
    std::vector<DetBox> as_boxes(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const DetPair& pair = pairs[i];
        as_boxes[i] = DetBox{pair.image, pair.part, pair.part_score};
        const auto it = gt_by_image.find(pair.image);
        if (it == gt_by_image.end()) continue;
        double best_iou = -1.0;
        int best = -1;
        for (const std::size_t gi : it->second) {
            if (taken[gi]) continue;
            const double part_iou = iou(pair.part, gt_pairs[gi].part);
            if (part_iou < protocol.iou_threshold) continue;
            if (!pair.has_body || iou(pair.body, gt_pairs[gi].body) < protocol.iou_threshold) {
                continue;  // the joint condition: the same annotation's body
            }
            if (part_iou > best_iou) {
                best_iou = part_iou;
                best = static_cast<int>(gi);
            }
        }
        if (best >= 0) {
            taken[static_cast<std::size_t>(best)] = 1;
            tp[i] = 1;
        }
    }
    return ap_result_from(as_boxes, tp, static_cast<long>(gt_pairs.size()));
}

CondAccuracyResult cond_accuracy(std::vector<DetPair> pairs,
                                 const std::vector<GtPair>& gt_pairs,
                                 const MatchProtocol& protocol) {
    protocol.validate();
    sort_pairs(pairs, PairScoreMode::part);
    const auto gt_by_image = group_by_image(gt_pairs, 0);
    std::vector<char> taken(gt_pairs.size(), 0);
    CondAccuracyResult result;
    for (const DetPair& pair : pairs) {
        const auto it = gt_by_image.find(pair.image);
        if (it == gt_by_image.end()) continue;
        double best_iou = -1.0;
        int best = -1;
        for (const std::size_t gi : it->second) {
            if (taken[gi]) continue;
            const double v = iou(pair.part, gt_pairs[gi].part);
            if (v < protocol.iou_threshold) continue;
            if (v > best_iou) {
                best_iou = v;
                best = static_cast<int>(gi);
            }
        }
        if (best < 0) continue;
        taken[static_cast<std::size_t>(best)] = 1;
        ++result.matched_parts;
        if (pair.has_body &&
            iou(pair.body, gt_pairs[static_cast<std::size_t>(best)].body) >=
                protocol.iou_threshold) {
            ++result.correctly_associated;
        }
    }
    if (result.matched_parts > 0) {
        result.percent = 100.0 * static_cast<double>(result.correctly_associated) /
                         static_cast<double>(result.matched_parts);
    }
    return result;
}

ContactApResult contact_ap(std::vector<ContactDet> detections,
                           const std::vector<ContactGt>& gts, const MatchProtocol& protocol) {
    protocol.validate();
    ContactApResult result;
    double ap_sum = 0.0;
    int ap_count = 0;
    for (int s = 0; s < 4; ++s) {
        // scored pool: hands annotated 0/1 for this state; unsure hands form
        // non-exclusive ignore regions
        std::vector<GtBox> positives;
        std::vector<GtBox> ignores;
        for (const ContactGt& gt : gts) {
            const int state = gt.states[static_cast<std::size_t>(s)];
            if (state == 1) {
                positives.push_back({gt.image, gt.box});
            } else if (state == 2) {
                ignores.push_back({gt.image, gt.box});
            }
        }
        result.positives[static_cast<std::size_t>(s)] = static_cast<long>(positives.size());
        std::sort(detections.begin(), detections.end(),
                  [s](const ContactDet& a, const ContactDet& b) {
                      const double sa = a.state_scores[static_cast<std::size_t>(s)];
                      const double sb = b.state_scores[static_cast<std::size_t>(s)];
                      if (sa != sb) return sa > sb;
                      if (a.det_score != b.det_score) return a.det_score > b.det_score;
                      if (a.image != b.image) return a.image < b.image;
                      return box_less(a.box, b.box);
                  });
        const auto pos_by_image = group_by_image(positives, 0);
        const auto ign_by_image = group_by_image(ignores, 0);
        std::vector<char> taken(positives.size(), 0);
        std::vector<DetBox> scored;
        std::vector<char> tp;
        std::vector<double> det_scores;  // secondary ranking score, kept to
                                         // place PR points at distinct
                                         // (state score, detection score)
        for (const ContactDet& det : detections) {
            const int m = match_greedy(det.box, det.image, positives, pos_by_image, taken,
                                       protocol.iou_threshold);
            if (m < 0) {
                // unmatched: excluded (not a false positive) when it lies on
                // an unsure hand
                bool ignored = false;
                const auto it = ign_by_image.find(det.image);
                if (it != ign_by_image.end()) {
                    for (const std::size_t gi : it->second) {
                        if (iou(det.box, ignores[gi].box) >= protocol.iou_threshold) {
                            ignored = true;
                            break;
                        }
                    }
                }
                if (ignored) continue;
            }
            scored.push_back(
                {det.image, det.box, det.state_scores[static_cast<std::size_t>(s)]});
            tp.push_back(m >= 0);
            det_scores.push_back(det.det_score);
        }
        std::vector<char> boundaries(scored.size(), 0);
        for (std::size_t i = 0; i < scored.size(); ++i) {
            boundaries[i] = i + 1 == scored.size() || scored[i + 1].score != scored[i].score ||
                            det_scores[i + 1] != det_scores[i];
        }
        if (!positives.empty()) {
            const ApResult ap = ap_result_from(scored, tp, static_cast<long>(positives.size()),
                                               &boundaries);
            result.state_ap[static_cast<std::size_t>(s)] = ap.ap;
            if (ap.ap) {
                ap_sum += *ap.ap;
                ++ap_count;
            }
        }
    }
    if (ap_count > 0) {
        result.mean_ap = ap_sum / ap_count;
    }
    return result;
}

EvalReport evaluate(const std::vector<Scene>& scenes,
                    const std::vector<DetectionRecord>& detections, const GridSpec& spec,
                    const EvalConfig& config) {
    config.protocol.validate();
    spec.validate();
    const int k = spec.part_count;

    std::unordered_map<std::string, int> image_index;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        if (!image_index.emplace(scenes[i].image_id, static_cast<int>(i)).second) {
            throw DataError("evaluate: duplicate scene image_id '" + scenes[i].image_id + "'");
        }
    }

    EvalReport report;
    report.images = static_cast<int>(scenes.size());
    report.config = config;

    // ground-truth pools
    std::vector<GtBox> gt_bodies;
    std::vector<std::vector<std::optional<Box>>> gt_body_parts(
        static_cast<std::size_t>(k));  // parallel to gt_bodies, per slot
    std::vector<std::vector<GtBox>> gt_parts(static_cast<std::size_t>(k));
    std::vector<std::vector<GtPair>> gt_pairs(static_cast<std::size_t>(k));
    std::vector<ContactGt> gt_contact;
    for (std::size_t si = 0; si < scenes.size(); ++si) {
        const int image = static_cast<int>(si);
        for (const BodyAnnotation& body : scenes[si].bodies) {
            gt_bodies.push_back({image, body.box});
            for (int j = 0; j < k; ++j) {
                const auto& part = body.parts[static_cast<std::size_t>(j)];
                const bool present = part && part->visible == 1;
                gt_body_parts[static_cast<std::size_t>(j)].push_back(
                    present ? std::optional<Box>(part->box) : std::nullopt);
                if (present) {
                    gt_parts[static_cast<std::size_t>(j)].push_back({image, part->box});
                    gt_pairs[static_cast<std::size_t>(j)].push_back(
                        {image, body.box, part->box});
                }
            }
            if (spec.has_contact()) {
                for (const int slot : spec.contact_slots) {
                    const auto& part = body.parts[static_cast<std::size_t>(slot)];
                    if (part && part->visible == 1) {
                        ContactGt gt;
                        gt.image = image;
                        gt.box = part->box;
                        gt.states = part->contact.value_or(ContactStates{2, 2, 2, 2});
                        gt_contact.push_back(gt);
                    }
                }
            }
        }
    }

    // detection pools
    std::vector<DetBox> det_bodies;
    std::vector<std::vector<DetBox>> det_parts(static_cast<std::size_t>(k));
    std::vector<std::vector<DetPair>> det_pairs(static_cast<std::size_t>(k));
    std::vector<std::vector<DetPair>> det_parts_as_pairs(static_cast<std::size_t>(k));
    std::vector<ContactDet> det_contact;
    std::vector<char> seen(scenes.size(), 0);
    for (const DetectionRecord& record : detections) {
        const auto it = image_index.find(record.image_id);
        if (it == image_index.end()) {
            throw DataError("evaluate: detections reference unknown image '" +
                            record.image_id + "'");
        }
        const int image = it->second;
        if (seen[static_cast<std::size_t>(image)]) {
            throw DataError("evaluate: duplicate detections for image '" + record.image_id +
                            "'");
        }
        seen[static_cast<std::size_t>(image)] = 1;
        for (const AssociatedDetection& det : record.bodies) {
            det_bodies.push_back({image, det.box, det.score});
            for (int j = 0; j < k; ++j) {
                const auto& part = det.parts[static_cast<std::size_t>(j)];
                if (!part) continue;
                det_parts[static_cast<std::size_t>(j)].push_back(
                    {image, part->box, part->score});
                DetPair pair;
                pair.image = image;
                pair.body = det.box;
                pair.part = part->box;
                pair.body_score = det.score;
                pair.part_score = part->score;
                det_pairs[static_cast<std::size_t>(j)].push_back(pair);
                det_parts_as_pairs[static_cast<std::size_t>(j)].push_back(pair);
                if (part->contact_scores) {
                    ContactDet cd;
                    cd.image = image;
                    cd.box = part->box;
                    cd.det_score = part->score;
                    cd.state_scores = *part->contact_scores;
                    det_contact.push_back(cd);
                }
            }
        }
        for (const UnassociatedPart& part : record.extra_parts) {
            if (part.slot < 0 || part.slot >= k) {
                throw DataError("evaluate: standalone part slot " + std::to_string(part.slot) +
                                " outside [0, " + std::to_string(k) + ")");
            }
            det_parts[static_cast<std::size_t>(part.slot)].push_back(
                {image, part.box, part.score});
            DetPair pair;
            pair.image = image;
            pair.part = part.box;
            pair.part_score = part.score;
            pair.has_body = false;
            det_parts_as_pairs[static_cast<std::size_t>(part.slot)].push_back(pair);
        }
    }

    const int n_images = report.images;
    report.body_ap = voc_ap(det_bodies, gt_bodies, config.protocol);
    report.body_mr2 = mr2(det_bodies, gt_bodies, n_images, config.protocol);

    double mmr_sum = 0.0;
    int mmr_count = 0;
    for (int j = 0; j < k; ++j) {
        SlotMetrics slot;
        slot.slot = j;
        slot.ap = voc_ap(det_parts[static_cast<std::size_t>(j)],
                         gt_parts[static_cast<std::size_t>(j)], config.protocol);
        slot.mmr2 = mmr2(det_pairs[static_cast<std::size_t>(j)], gt_bodies,
                         gt_body_parts[static_cast<std::size_t>(j)], n_images, config.protocol,
                         config.pair_score);
        slot.joint_ap = joint_ap(det_pairs[static_cast<std::size_t>(j)],
                                 gt_pairs[static_cast<std::size_t>(j)], config.protocol);
        slot.cond_accuracy = cond_accuracy(det_parts_as_pairs[static_cast<std::size_t>(j)],
                                           gt_pairs[static_cast<std::size_t>(j)],
                                           config.protocol);
        if (slot.mmr2.value) {
            mmr_sum += *slot.mmr2.value;
            ++mmr_count;
        }
        report.slots.push_back(std::move(slot));
    }
    if (mmr_count > 0) {
        report.mmr2_mean = mmr_sum / mmr_count;
    }
    if (spec.has_contact()) {
        report.contact = contact_ap(det_contact, gt_contact, config.protocol);
    }
    return report;
}

std::string eval_report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["images"] = report.images;
    j["config"] = {{"iou_threshold", report.config.protocol.iou_threshold},
                   {"fppi_samples", report.config.protocol.fppi_samples},
                   {"fppi_min", report.config.protocol.fppi_min},
                   {"fppi_max", report.config.protocol.fppi_max},
                   {"pair_score", pair_score_mode_name(report.config.pair_score)}};
    j["body"] = ap_to_json(report.body_ap);
    j["body"]["mr2"] = mr_to_json(report.body_mr2);
    auto slots = nlohmann::json::array();
    for (const SlotMetrics& s : report.slots) {
        nlohmann::json js = ap_to_json(s.ap);
        js["slot"] = s.slot;
        js["mmr2"] = mr_to_json(s.mmr2);
        js["joint_ap"] = number_or_null(s.joint_ap.ap);
        js["joint_pr_curve"] = ap_to_json(s.joint_ap)["pr_curve"];
        js["cond_accuracy"] = number_or_null(s.cond_accuracy.percent);
        js["matched_parts"] = s.cond_accuracy.matched_parts;
        js["correctly_associated"] = s.cond_accuracy.correctly_associated;
        slots.push_back(js);
    }
    j["slots"] = slots;
    j["mmr2_mean"] = number_or_null(report.mmr2_mean);
    if (report.contact) {
        nlohmann::json jc;
        auto aps = nlohmann::json::array();
        auto npos = nlohmann::json::array();
        for (int s = 0; s < 4; ++s) {
            aps.push_back(number_or_null(report.contact->state_ap[static_cast<std::size_t>(s)]));
            npos.push_back(report.contact->positives[static_cast<std::size_t>(s)]);
        }
        jc["state_ap"] = aps;
        jc["positives"] = npos;
        jc["mean_ap"] = number_or_null(report.contact->mean_ap);
        j["contact"] = jc;
    }
    return j.dump(2);
}

}  // namespace bpj
