#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bpj/grid_spec.hpp"

namespace bpj {

/// Whether matched-cell objectness targets are the box-quality product
/// (hit * clamped CIoU) or the plain hit indicator.
enum class ObjTargetMode { ciou, binary };

/// Weights and reduction settings for the multi-task loss.
struct LossConfig {
    double alpha = 0.05;   // box term
    double beta = 0.7;     // objectness term
    double gamma = 0.3;    // class term
    double lambda = 0.015; // body-part offset term
    double mu = 0.01;      // contact term (contact variant only)
    /// Per-stride balance weights for the objectness term, index-aligned with
    /// GridSpec::strides.
    std::vector<double> stride_weights = {4.0, 1.0, 0.25, 0.06};
    int batch_size = 1;  // N_bs scale on the total
    ObjTargetMode obj_target_mode = ObjTargetMode::ciou;

    // anchor-free variant weights; the offset weight defaults to 1/k
    double alpha_free = 7.5;
    double gamma_free = 0.5;
    std::optional<double> lambda_free;

    double resolved_lambda_free(int part_count) const {
        return lambda_free ? *lambda_free : 1.0 / part_count;
    }
    /// Throws DataError on negative weights, non-positive batch size, or a
    /// stride-weight count that does not cover the spec's strides.
    void validate(const GridSpec& spec) const;
};

/// One stride's share of every component plus element counts.
struct StrideLoss {
    int stride = 0;
    double box = 0.0;
    double obj = 0.0;  // already scaled by the stride weight
    double cls = 0.0;
    double bpd = 0.0;
    double cts = 0.0;
    int matched_cells = 0;  // box/cls denominator
    int total_cells = 0;    // objectness denominator (anchors * h * w)
    int offset_pairs = 0;   // contributing (cell, slot) pairs
    int contact_groups = 0; // contributing (cell, hand-group) pairs
};

struct LossReport {
    double box = 0.0;
    double obj = 0.0;
    double cls = 0.0;
    double bpd = 0.0;
    double cts = 0.0;
    double total = 0.0;
    // set when a component had zero contributing elements anywhere
    bool box_empty = false;
    bool cls_empty = false;
    bool bpd_empty = false;
    bool cts_empty = false;
    std::vector<StrideLoss> per_stride;
};

/// Computes every loss component and the weighted total for one image's
/// prediction/target grid pair. Tensors must be index-aligned with
/// spec.strides. Deterministic summation order (stride-major, then anchor,
/// row, column).
LossReport compute_losses(const std::vector<GridTensor>& pred,
                          const std::vector<GridTensor>& target, const GridSpec& spec,
                          const LossConfig& config = {});

/// Weighted total from precomputed components: N_bs * (a*box + b*obj + c*cls
/// + l*bpd [+ m*cts]); the contact term participates only for the contact
/// variant, and the anchor-free variant uses its own weight set (no
/// objectness or contact term).
double loss_total(double box, double obj, double cls, double bpd, double cts,
                  const GridSpec& spec, const LossConfig& config = {});

// Single-component conveniences (each runs the full pass and projects out one
// component).
double loss_box(const std::vector<GridTensor>& pred, const std::vector<GridTensor>& target,
                const GridSpec& spec, const LossConfig& config = {});
double loss_obj(const std::vector<GridTensor>& pred, const std::vector<GridTensor>& target,
                const GridSpec& spec, const LossConfig& config = {});
double loss_cls(const std::vector<GridTensor>& pred, const std::vector<GridTensor>& target,
                const GridSpec& spec, const LossConfig& config = {});
double loss_bpd(const std::vector<GridTensor>& pred, const std::vector<GridTensor>& target,
                const GridSpec& spec, const LossConfig& config = {});
double loss_cts(const std::vector<GridTensor>& pred, const std::vector<GridTensor>& target,
                const GridSpec& spec, const LossConfig& config = {});

/// Binary cross-entropy with the probability clamped away from {0,1};
/// accepts soft targets in [0,1].
double bce(double p, double t);

/// Report serialization for the CLI (includes the effective config echo).
nlohmann::json loss_report_to_json(const LossReport& report, const GridSpec& spec,
                                   const LossConfig& config);

}  // namespace bpj
