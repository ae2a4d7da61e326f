#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "bpj/detections.hpp"
#include "bpj/grid_spec.hpp"
#include "bpj/transforms.hpp"

namespace bpj {

/// How an occupied body slot is contested by a later part candidate.
///  - confidence: the stored part is replaced only by a higher-confidence one
///    (the reference decoding rule).
///  - nearest_wins: the part closest to the body's predicted center keeps the
///    slot regardless of confidence (alternative rule, off by default).
enum class AssociationMode { confidence, nearest_wins };

struct DecodeConfig {
    double body_conf = 0.05;   // confidence floor for body candidates
    double body_iou = 0.6;     // NMS IoU threshold for the body group
    double part_conf = 0.1;    // confidence floor for part candidates
    double part_iou = 0.3;     // NMS IoU threshold for each part group
    double inner_iou = 0.6;    // association gate on inner IoU(body, part)
    int max_detections = 300;  // per image, per NMS group
    /// When set, bodies whose given slot stays empty are dropped and no
    /// standalone (unassociated) parts are emitted.
    std::optional<int> require_association;
    AssociationMode association_mode = AssociationMode::confidence;
    double contact_weight_part = 0.6;  // fusion weight for the part's own states
    double contact_weight_body = 0.4;  // fusion weight for the body's states

    /// Throws DataError on thresholds outside [0,1], non-positive
    /// max_detections, a check slot outside [0,k), or non-positive fusion
    /// weight sum.
    void validate(const GridSpec& spec) const;
};

/// A scored, pixel-space detection candidate (one per cell/anchor/class that
/// clears the confidence floor). Bodies carry the k predicted part-center
/// points derived from the offset channels.
struct Candidate {
    int kind = kBodyKind;  // kBodyKind or part slot in [0,k)
    Box box;               // pixels
    double score = 0.0;    // objectness * class score (class score alone when
                           // there is no objectness channel)
    std::vector<std::array<double, 2>> centers;  // bodies: k pixel points
    std::optional<std::array<std::array<double, 4>, 2>> contact;
    bool degenerate = false;
};

/// Association output prior to filtering: the per-body detections, the
/// indices (into the parts input) of candidates no slot claimed, and the
/// occupant part index per (body, slot) pair (-1 when the slot is empty).
struct AssociationResult {
    std::vector<AssociatedDetection> detections;
    std::vector<std::size_t> unclaimed;
    std::vector<std::ptrdiff_t> occupants;  // detections.size() * k, row-major
};

struct DecodeStats {
    long sites_scanned = 0;     // cell/anchor locations visited
    long candidates = 0;        // candidates above the confidence floors
    long kept_bodies = 0;       // after NMS
    long kept_parts = 0;        // after NMS, all slots
    long associated_parts = 0;  // parts that ended up in a body slot
    long dropped_bodies = 0;    // bodies removed by the required-slot check
    long dropped_parts = 0;     // unassociated parts suppressed by that check
    std::vector<std::string> warnings;
};

/// Greedy non-maximum suppression. Candidates below `tau_conf` are dropped
/// first; the rest are visited in descending score order (ties broken by
/// lower input index) and suppressed when their IoU with an already-kept
/// candidate of the same kind exceeds `tau_iou`. At most `max_detections`
/// per kind survive. Returns kept candidates in visit order.
std::vector<Candidate> nms(const std::vector<Candidate>& objects, double tau_conf,
                           double tau_iou, int max_detections = 300);

/// Association decoding: each part candidate (processed in descending score
/// order) elects the body whose predicted center for the part's slot is
/// nearest (L2) to the part's box center, then occupies that body's slot iff
/// the inner IoU gate passes and it wins the slot contest (see
/// AssociationMode). Losing or gated-out parts are reported unclaimed.
AssociationResult associate(const std::vector<Candidate>& bodies,
                            const std::vector<Candidate>& parts, const GridSpec& spec,
                            const DecodeConfig& config);

/// Drops detections whose `slot` part is absent; returns the dropped count.
/// Throws DataError when `slot` is outside [0, parts-per-detection).
long double_check(std::vector<AssociatedDetection>& detections, int slot);

/// Weighted fusion of the part instance's contact-state probabilities with
/// its associated body's. Weights that do not sum to 1 are normalized, with a
/// warning appended to `warnings` when given; a zero weight sum throws
/// DataError.
std::array<double, 4> fuse_contact(const std::array<double, 4>& part_probs,
                                   const std::array<double, 4>& body_probs, double weight_part,
                                   double weight_body,
                                   std::vector<std::string>* warnings = nullptr);

/// Full per-image pipeline: scan all grids for candidates (stride ascending,
/// then anchor, row, column, class), NMS per group, rescale to pixels,
/// associate, fuse contact scores, and apply the required-slot check.
/// Deterministic for identical inputs and config.
DetectionRecord decode_image(const std::vector<GridTensor>& grids, const GridSpec& spec,
                             const DecodeConfig& config, const std::string& image_id,
                             DecodeStats* stats = nullptr);

}  // namespace bpj
