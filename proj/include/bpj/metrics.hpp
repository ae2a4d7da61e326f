#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bpj/detections.hpp"
#include "bpj/geometry.hpp"
#include "bpj/grid_spec.hpp"
#include "bpj/scene.hpp"

namespace bpj {

/// Matching and curve-sampling conventions shared by all metrics.
struct MatchProtocol {
    double iou_threshold = 0.5;
    int fppi_samples = 9;     // log-spaced FPPI sampling points
    double fppi_min = 1e-2;
    double fppi_max = 1.0;

    /// The sampling grid: `fppi_samples` log-spaced values spanning
    /// [fppi_min, fppi_max], ascending.
    std::vector<double> fppi_grid() const;
    /// Throws DataError on iou_threshold outside (0,1), fewer than 2 samples,
    /// or a non-positive/inverted FPPI range.
    void validate() const;
};

/// Score used to rank a (body, part) pair in the miss-matching-rate sweep.
enum class PairScoreMode { body, min_body_part, part };

std::string pair_score_mode_name(PairScoreMode mode);
PairScoreMode pair_score_mode_from_name(const std::string& name);

/// One box detection/annotation, image given as an index into the scene list.
struct DetBox {
    int image = 0;
    Box box;
    double score = 0.0;
};
struct GtBox {
    int image = 0;
    Box box;
};

/// A detected (body, part) pair for one slot. Standalone part detections
/// (emitted without association) set has_body = false; they never count as
/// correctly associated but still compete as part detections.
struct DetPair {
    int image = 0;
    Box body;
    Box part;
    double body_score = 0.0;
    double part_score = 0.0;
    bool has_body = true;
};
/// A ground-truth (body, part) pair; `body_index` identifies the annotation
/// so pair matching can insist on the same body.
struct GtPair {
    int image = 0;
    Box body;
    Box part;
};

/// A hand detection carrying fused contact-state scores.
struct ContactDet {
    int image = 0;
    Box box;
    double det_score = 0.0;
    std::array<double, 4> state_scores{};
};
/// A ground-truth hand with contact states (0 no, 1 yes, 2 unsure; unsure is
/// excluded from scoring).
struct ContactGt {
    int image = 0;
    Box box;
    ContactStates states{2, 2, 2, 2};
};

/// Precision/recall point at one score threshold.
struct PrPoint {
    double score = 0.0;
    double recall = 0.0;
    double precision = 0.0;
};

/// Average-precision output with its PR curve (one point per distinct score).
struct ApResult {
    std::optional<double> ap;     // absent when there is no ground truth
    long positives = 0;           // ground-truth count
    long detections = 0;
    long true_positives = 0;      // at the full detection set
    double final_precision = 0.0; // precision over all detections
    std::vector<PrPoint> curve;
};

/// Log-average miss-rate output with its FPPI curve.
struct MrResult {
    std::optional<double> value;
    std::vector<std::array<double, 2>> curve;   // (fppi, miss rate) per threshold
    std::vector<double> sampled;                // miss rate at each grid point
};

struct CondAccuracyResult {
    std::optional<double> percent;  // absent when no detected part matches
    long matched_parts = 0;
    long correctly_associated = 0;
};

struct ContactApResult {
    std::array<std::optional<double>, 4> state_ap;
    std::optional<double> mean_ap;  // over states that have positives
    std::array<long, 4> positives{};
};

/// VOC-style average precision, all-point interpolation. Detections are
/// ranked by score (ties broken canonically by image and coordinates, so
/// input order never matters); each detection greedily takes the
/// highest-IoU unmatched ground truth of its image at IoU >= threshold.
ApResult voc_ap(std::vector<DetBox> detections, const std::vector<GtBox>& gts,
                const MatchProtocol& protocol);

/// Log-average miss rate over the protocol's FPPI grid. At each grid value
/// the operating point is the largest score-threshold prefix whose FPPI does
/// not exceed it (the empty prefix, miss rate 1, is always available). Miss
/// rates are floored at 1e-10 inside the log; an all-floor average reports 0.
MrResult mr2(std::vector<DetBox> detections, const std::vector<GtBox>& gts, int n_images,
             const MatchProtocol& protocol);

/// Log-average miss-matching rate. Pairs are ranked by the chosen pair
/// score; at each prefix the pair's body greedily matches unmatched
/// ground-truth bodies, a matched pair additionally requires the part to hit
/// the same annotation's part box. mMR = 1 - matched/body-matched (1 when no
/// pair's body matches); FPPI counts pairs whose body matched nothing.
/// `gt_bodies` lists every annotated body; `gt_body_parts` runs parallel to
/// it and holds each body's part box for this slot, or nullopt when that
/// body has no visible part.
MrResult mmr2(std::vector<DetPair> pairs, const std::vector<GtBox>& gt_bodies,
              const std::vector<std::optional<Box>>& gt_body_parts, int n_images,
              const MatchProtocol& protocol, PairScoreMode mode);

/// AP over pairs: a pair is a true positive only when its part box matches a
/// ground-truth pair's part and its body box matches that same annotation's
/// body. Ranked by part score.
ApResult joint_ap(std::vector<DetPair> pairs, const std::vector<GtPair>& gt_pairs,
                  const MatchProtocol& protocol);

/// Among detected parts that match a ground-truth part, the percentage whose
/// associated body box matches that annotation's body. Parts emitted without
/// a body count as incorrectly associated when they match.
CondAccuracyResult cond_accuracy(std::vector<DetPair> pairs,
                                 const std::vector<GtPair>& gt_pairs,
                                 const MatchProtocol& protocol);

/// Per-state AP for contact estimation: detections are ranked by the state's
/// score (ties by detection score), and localization follows the usual box
/// match against that state's positive hands. Unmatched detections that lie
/// on a hand whose state is unsure are dropped from scoring; the rest are
/// false positives. States without positives report no AP; the mean covers
/// the states that do.
ContactApResult contact_ap(std::vector<ContactDet> detections,
                           const std::vector<ContactGt>& gts, const MatchProtocol& protocol);

struct EvalConfig {
    MatchProtocol protocol;
    PairScoreMode pair_score = PairScoreMode::body;
};

/// Per-slot block of the evaluation report.
struct SlotMetrics {
    int slot = 0;
    ApResult ap;                 // part detection AP (standalone parts included)
    MrResult mmr2;               // association miss-matching rate
    ApResult joint_ap;           // pair AP (body and part jointly correct)
    CondAccuracyResult cond_accuracy;
};

struct EvalReport {
    int images = 0;
    ApResult body_ap;
    MrResult body_mr2;
    std::vector<SlotMetrics> slots;
    std::optional<double> mmr2_mean;  // over slots with a defined value
    std::optional<ContactApResult> contact;
    EvalConfig config;
};

/// Scores detection records against ground-truth scenes. Detections must
/// reference scene image ids (unknown or duplicate ids raise DataError);
/// scenes without detections count as images with nothing found.
EvalReport evaluate(const std::vector<Scene>& scenes,
                    const std::vector<DetectionRecord>& detections, const GridSpec& spec,
                    const EvalConfig& config = {});

/// Serializes the full report (values, curves, and the effective config) as
/// a JSON object.
std::string eval_report_to_json(const EvalReport& report);

}  // namespace bpj
