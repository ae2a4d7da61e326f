// bpjkit: command-line driver for the joint body/body-part detection engine.
//
// Subcommands: synth (scene generation), assign (ground truth -> target
// grids), loss (prediction vs target grids), decode (grids -> detections),
// eval (detections vs ground truth), report (render an eval report).
//
// Exit status: 0 success, 1 usage error, 2 data/format error.  Machine
// outputs go to stdout or --out; diagnostics and the effective-config echo
// go to stderr.  Option precedence: flags > --config file > built-in
// defaults.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bpj/assigner.hpp"
#include "bpj/common.hpp"
#include "bpj/decoder.hpp"
#include "bpj/grid_spec.hpp"
#include "bpj/io.hpp"
#include "bpj/losses.hpp"
#include "bpj/metrics.hpp"
#include "bpj/pipeline.hpp"
#include "bpj/rng.hpp"
#include "bpj/synth.hpp"

namespace {

using nlohmann::json;

constexpr const char* kSubcommands[] = {"synth", "assign", "loss", "decode", "eval", "report"};

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw bpj::DataError("cannot open file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw bpj::DataError("file " + path + ": " + e.what());
    }
    return j;
}

/// Configuration-file layer under the flags.  Keys are long flag names
/// without the leading dashes.  A file may be flat, or sectioned by
/// subcommand name when every top-level value is an object under a known
/// subcommand key.
class FileConfig {
  public:
    FileConfig(const CLI::App* sub, const std::string& path, const std::string& subcommand)
        : sub_(sub) {
        if (path.empty()) return;
        path_ = path;
        json j = load_json_file(path);
        if (!j.is_object()) {
            throw bpj::DataError("config file " + path + ": expected a JSON object");
        }
        bool sectioned = !j.empty();
        for (const auto& [key, value] : j.items()) {
            const bool known = std::find(std::begin(kSubcommands), std::end(kSubcommands), key) !=
                               std::end(kSubcommands);
            if (!known || !value.is_object()) {
                sectioned = false;
                break;
            }
        }
        if (sectioned) {
            values_ = j.contains(subcommand) ? j.at(subcommand) : json::object();
        } else {
            values_ = std::move(j);
        }
    }

    template <typename T>
    void fill(const std::string& flag, T& value) {
        known_.push_back(flag);
        if (values_.is_null()) return;
        if (sub_->count("--" + flag) > 0) return;  // explicit flags win
        const auto it = values_.find(flag);
        if (it == values_.end() || it->is_null()) return;
        try {
            value = it->get<T>();
        } catch (const json::exception&) {
            throw bpj::DataError("config file " + path_ + ": key '" + flag +
                                 "' has the wrong type");
        }
    }

    template <typename T>
    void fill(const std::string& flag, std::optional<T>& value) {
        T inner{};
        const bool had = values_.is_object() && values_.contains(flag) && !values_.at(flag).is_null();
        fill(flag, inner);
        if (had && sub_->count("--" + flag) == 0) value = inner;
    }

    /// Rejects keys that no flag of this subcommand consumes.
    void finish() const {
        if (values_.is_null()) return;
        for (const auto& [key, value] : values_.items()) {
            (void)value;
            if (std::find(known_.begin(), known_.end(), key) == known_.end()) {
                throw bpj::DataError("config file " + path_ + ": unknown key '" + key + "'");
            }
        }
    }

  private:
    const CLI::App* sub_;
    std::string path_;
    json values_;  // null when no config file was given
    std::vector<std::string> known_;
};

void echo_config(const std::string& subcommand, const json& cfg) {
    std::cerr << json{{"subcommand", subcommand}, {"config", cfg}}.dump() << "\n";
}

void write_text_output(const std::optional<std::string>& out, const std::string& text) {
    if (out) {
        std::ofstream f(*out, std::ios::binary);
        if (!f) throw bpj::DataError("cannot open output file " + *out);
        f << text;
        if (!f) throw bpj::DataError("failed while writing " + *out);
    } else {
        std::cout << text;
    }
}

template <typename T, typename Fn>
void write_ndjson_output(const std::optional<std::string>& out, const std::vector<T>& records,
                         Fn to_line) {
    std::string text;
    for (const T& r : records) {
        text += to_line(r);
        text += '\n';
    }
    write_text_output(out, text);
}

std::string format_fixed(double v, int digits = 4) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string format_opt(const std::optional<double>& v, int digits = 4) {
    return v ? format_fixed(*v, digits) : std::string("n/a");
}

// ---------------------------------------------------------------------------
// synth

struct SynthOpts {
    std::string preset = "humanoid-k2-hands";
    std::string layout_path;
    int n = 8;
    std::uint64_t seed = 1;
    int width = 256, height = 256;
    int min_bodies = 1, max_bodies = 4;
    double min_body_w = 48.0, max_body_w = 120.0, max_aspect = 1.4, occlusion_cap = 0.0;
    std::optional<double> visibility;
    double contact_positive = 0.4, contact_unsure = 0.2;
    double sigma_box = 0.0, sigma_offset = 0.0, sigma_score = 0.0;
    double fn_rate = 0.0, fp_body_rate = 0.0, fp_part_rate = 0.0;
    std::uint64_t noise_seed = 0;
    std::optional<std::string> out;
    std::optional<std::string> grids_out;
    std::optional<std::string> targets_out;
    std::optional<std::string> spec_out;
    int workers = 0;
    std::string config_path;
};

void run_synth(const CLI::App* sub, SynthOpts& o) {
    FileConfig file(sub, o.config_path, "synth");
    file.fill("preset", o.preset);
    file.fill("layout", o.layout_path);
    file.fill("n", o.n);
    file.fill("seed", o.seed);
    file.fill("width", o.width);
    file.fill("height", o.height);
    file.fill("min-bodies", o.min_bodies);
    file.fill("max-bodies", o.max_bodies);
    file.fill("min-body-w", o.min_body_w);
    file.fill("max-body-w", o.max_body_w);
    file.fill("max-aspect", o.max_aspect);
    file.fill("occlusion-cap", o.occlusion_cap);
    file.fill("visibility", o.visibility);
    file.fill("contact-positive", o.contact_positive);
    file.fill("contact-unsure", o.contact_unsure);
    file.fill("sigma-box", o.sigma_box);
    file.fill("sigma-offset", o.sigma_offset);
    file.fill("sigma-score", o.sigma_score);
    file.fill("fn-rate", o.fn_rate);
    file.fill("fp-body-rate", o.fp_body_rate);
    file.fill("fp-part-rate", o.fp_part_rate);
    file.fill("noise-seed", o.noise_seed);
    file.fill("workers", o.workers);
    file.finish();

    bpj::SynthConfig config;
    if (!o.layout_path.empty()) {
        std::ifstream in(o.layout_path);
        if (!in) throw bpj::DataError("cannot open layout file " + o.layout_path);
        std::stringstream buffer;
        buffer << in.rdbuf();
        config.layout = bpj::PartLayout::from_json(buffer.str());
    } else {
        config.layout = bpj::PartLayout::preset(o.preset);
    }
    config.n_images = o.n;
    config.seed = o.seed;
    config.width = o.width;
    config.height = o.height;
    config.min_bodies = o.min_bodies;
    config.max_bodies = o.max_bodies;
    config.min_body_w = o.min_body_w;
    config.max_body_w = o.max_body_w;
    config.max_aspect = o.max_aspect;
    config.occlusion_cap = o.occlusion_cap;
    config.visibility_override = o.visibility;
    config.contact_positive = o.contact_positive;
    config.contact_unsure = o.contact_unsure;

    bpj::NoiseModel noise;
    noise.sigma_box = o.sigma_box;
    noise.sigma_offset = o.sigma_offset;
    noise.sigma_score = o.sigma_score;
    noise.fn_rate = o.fn_rate;
    noise.fp_body_rate = o.fp_body_rate;
    noise.fp_part_rate = o.fp_part_rate;
    noise.validate();

    echo_config("synth",
                {{"layout", config.layout.name},
                 {"variant", bpj::variant_name(config.layout.variant)},
                 {"k", config.layout.k()},
                 {"n", config.n_images},
                 {"seed", config.seed},
                 {"width", config.width},
                 {"height", config.height},
                 {"min_bodies", config.min_bodies},
                 {"max_bodies", config.max_bodies},
                 {"min_body_w", config.min_body_w},
                 {"max_body_w", config.max_body_w},
                 {"max_aspect", config.max_aspect},
                 {"occlusion_cap", config.occlusion_cap},
                 {"visibility_override",
                  o.visibility ? json(*o.visibility) : json(nullptr)},
                 {"contact_positive", config.contact_positive},
                 {"contact_unsure", config.contact_unsure},
                 {"noise",
                  {{"sigma_box", noise.sigma_box},
                   {"sigma_offset", noise.sigma_offset},
                   {"sigma_score", noise.sigma_score},
                   {"fn_rate", noise.fn_rate},
                   {"fp_body_rate", noise.fp_body_rate},
                   {"fp_part_rate", noise.fp_part_rate}}},
                 {"noise_seed", o.noise_seed},
                 {"workers", o.workers}});

    const bpj::GridSpec spec = config.make_spec();
    const std::vector<bpj::Scene> scenes = bpj::gen_scenes_parallel(config, o.workers);
    write_ndjson_output(o.out, scenes, bpj::scene_to_line);
    if (o.spec_out) bpj::write_spec(*o.spec_out, spec);

    std::vector<std::string> ids;
    ids.reserve(scenes.size());
    for (const bpj::Scene& s : scenes) ids.push_back(s.image_id);

    if (o.targets_out) {
        const auto assigned = bpj::assign_batch(scenes, spec, bpj::AssignConfig{}, o.workers);
        bpj::GridDump dump;
        dump.spec = spec;
        dump.image_ids = ids;
        dump.kind = "targets";
        for (const bpj::AssignResult& a : assigned) dump.images.push_back(a.targets);
        bpj::write_grid_dump(*o.targets_out, dump);
    }
    if (o.grids_out) {
        bpj::GridDump dump;
        dump.spec = spec;
        dump.image_ids = ids;
        dump.kind = "predictions";
        dump.images.resize(scenes.size());
        bpj::parallel_for(static_cast<int>(scenes.size()), bpj::resolve_workers(o.workers),
                          [&](int i) {
                              const std::uint64_t image_seed =
                                  bpj::Rng::derive(o.noise_seed, static_cast<std::uint64_t>(i))
                                      .next_u64();
                              dump.images[static_cast<std::size_t>(i)] = bpj::render_predicted(
                                  scenes[static_cast<std::size_t>(i)], spec, noise, image_seed);
                          });
        bpj::write_grid_dump(*o.grids_out, dump);
    }
    std::cerr << "synth: " << scenes.size() << " scenes\n";
}

// ---------------------------------------------------------------------------
// assign

struct AssignOpts {
    std::string scenes_path;
    std::string spec_path;
    std::string out;
    int neighbor_cells = 2;
    bool offsets_at_neighbors = true;
    double min_size = 2.0;
    double anchor_ratio_max = 4.0;
    int workers = 0;
    std::string config_path;
};

void run_assign(const CLI::App* sub, AssignOpts& o) {
    FileConfig file(sub, o.config_path, "assign");
    file.fill("neighbor-cells", o.neighbor_cells);
    file.fill("offsets-at-neighbors", o.offsets_at_neighbors);
    file.fill("min-size", o.min_size);
    file.fill("anchor-ratio-max", o.anchor_ratio_max);
    file.fill("workers", o.workers);
    file.finish();

    bpj::AssignConfig config;
    config.neighbor_cells = o.neighbor_cells;
    config.offsets_at_neighbors = o.offsets_at_neighbors;
    config.min_size = o.min_size;
    config.anchor_ratio_max = o.anchor_ratio_max;

    echo_config("assign", {{"neighbor_cells", config.neighbor_cells},
                           {"offsets_at_neighbors", config.offsets_at_neighbors},
                           {"min_size", config.min_size},
                           {"anchor_ratio_max", config.anchor_ratio_max},
                           {"workers", o.workers}});

    const bpj::GridSpec spec = bpj::read_spec(o.spec_path);
    const std::vector<bpj::Scene> scenes = bpj::read_scenes(o.scenes_path);
    const auto results = bpj::assign_batch(scenes, spec, config, o.workers);

    bpj::GridDump dump;
    dump.spec = spec;
    dump.kind = "targets";
    long collisions = 0, dropped = 0, skipped = 0, unmatched = 0;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        dump.image_ids.push_back(scenes[i].image_id);
        dump.images.push_back(results[i].targets);
        collisions += results[i].stats.collisions;
        dropped += results[i].stats.dropped_offsets;
        skipped += results[i].stats.skipped_objects;
        unmatched += results[i].stats.unmatched_objects;
    }
    bpj::write_grid_dump(o.out, dump);
    std::cerr << "assign: " << scenes.size() << " scenes, collisions " << collisions
              << ", dropped offsets " << dropped << ", skipped " << skipped << ", unmatched "
              << unmatched << "\n";
}

// ---------------------------------------------------------------------------
// loss

struct LossOpts {
    std::string pred_path;
    std::string targets_path;
    std::optional<std::string> out;
    double alpha = 0.05, beta = 0.7, gamma = 0.3, lambda = 0.015, mu = 0.01;
    std::vector<double> stride_weights = {4.0, 1.0, 0.25, 0.06};
    int batch_size = 1;
    std::string obj_target = "ciou";
    double alpha_free = 7.5, gamma_free = 0.5;
    std::optional<double> lambda_free;
    std::string config_path;
};

void run_loss(const CLI::App* sub, LossOpts& o) {
    FileConfig file(sub, o.config_path, "loss");
    file.fill("alpha", o.alpha);
    file.fill("beta", o.beta);
    file.fill("gamma", o.gamma);
    file.fill("lambda", o.lambda);
    file.fill("mu", o.mu);
    file.fill("stride-weights", o.stride_weights);
    file.fill("batch-size", o.batch_size);
    file.fill("obj-target", o.obj_target);
    file.fill("alpha-free", o.alpha_free);
    file.fill("gamma-free", o.gamma_free);
    file.fill("lambda-free", o.lambda_free);
    file.finish();

    bpj::LossConfig config;
    config.alpha = o.alpha;
    config.beta = o.beta;
    config.gamma = o.gamma;
    config.lambda = o.lambda;
    config.mu = o.mu;
    config.stride_weights = o.stride_weights;
    config.batch_size = o.batch_size;
    if (o.obj_target == "ciou") {
        config.obj_target_mode = bpj::ObjTargetMode::ciou;
    } else if (o.obj_target == "binary") {
        config.obj_target_mode = bpj::ObjTargetMode::binary;
    } else {
        throw bpj::DataError("unknown --obj-target '" + o.obj_target + "' (ciou, binary)");
    }
    config.alpha_free = o.alpha_free;
    config.gamma_free = o.gamma_free;
    config.lambda_free = o.lambda_free;

    const bpj::GridDump pred = bpj::read_grid_dump(o.pred_path);
    const bpj::GridDump targets = bpj::read_grid_dump(o.targets_path);
    if (bpj::spec_to_json(pred.spec) != bpj::spec_to_json(targets.spec)) {
        throw bpj::DataError("grid specs of " + o.pred_path + " and " + o.targets_path +
                             " do not match");
    }
    if (pred.image_ids != targets.image_ids) {
        throw bpj::DataError("image lists of " + o.pred_path + " and " + o.targets_path +
                             " do not match");
    }
    config.validate(pred.spec);

    // config block of the echo, identical to the one embedded in the report
    const json config_echo =
        bpj::loss_report_to_json(bpj::LossReport{}, pred.spec, config).at("config");
    echo_config("loss", config_echo);

    json out;
    out["images"] = json::array();
    double sum_box = 0, sum_obj = 0, sum_cls = 0, sum_bpd = 0, sum_cts = 0, sum_total = 0;
    for (std::size_t i = 0; i < pred.images.size(); ++i) {
        const bpj::LossReport report =
            bpj::compute_losses(pred.images[i], targets.images[i], pred.spec, config);
        json jr = bpj::loss_report_to_json(report, pred.spec, config);
        jr.erase("config");  // echoed once at the top level
        jr["image_id"] = pred.image_ids[i];
        out["images"].push_back(std::move(jr));
        sum_box += report.box;
        sum_obj += report.obj;
        sum_cls += report.cls;
        sum_bpd += report.bpd;
        sum_cts += report.cts;
        sum_total += report.total;
    }
    const double n = pred.images.empty() ? 1.0 : static_cast<double>(pred.images.size());
    out["mean"] = {{"box", sum_box / n}, {"obj", sum_obj / n},   {"cls", sum_cls / n},
                   {"bpd", sum_bpd / n}, {"cts", sum_cts / n},   {"total", sum_total / n}};
    out["config"] = config_echo;
    write_text_output(o.out, out.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// decode

struct DecodeOpts {
    std::string grids_path;
    std::optional<std::string> spec_path;
    std::optional<std::string> out;
    double tb_conf = 0.05, tb_iou = 0.6, tp_conf = 0.1, tp_iou = 0.3, inner_iou = 0.6;
    int max_detections = 300;
    std::optional<int> require_association;
    std::string association_mode = "confidence";
    double contact_wh = 0.6, contact_wb = 0.4;
    int workers = 0;
    std::string config_path;
};

void run_decode(const CLI::App* sub, DecodeOpts& o) {
    FileConfig file(sub, o.config_path, "decode");
    file.fill("tb-conf", o.tb_conf);
    file.fill("tb-iou", o.tb_iou);
    file.fill("tp-conf", o.tp_conf);
    file.fill("tp-iou", o.tp_iou);
    file.fill("inner-iou", o.inner_iou);
    file.fill("max-detections", o.max_detections);
    file.fill("require-association", o.require_association);
    file.fill("association-mode", o.association_mode);
    file.fill("contact-wh", o.contact_wh);
    file.fill("contact-wb", o.contact_wb);
    file.fill("workers", o.workers);
    file.finish();

    bpj::DecodeConfig config;
    config.body_conf = o.tb_conf;
    config.body_iou = o.tb_iou;
    config.part_conf = o.tp_conf;
    config.part_iou = o.tp_iou;
    config.inner_iou = o.inner_iou;
    config.max_detections = o.max_detections;
    config.require_association = o.require_association;
    if (o.association_mode == "confidence") {
        config.association_mode = bpj::AssociationMode::confidence;
    } else if (o.association_mode == "nearest") {
        config.association_mode = bpj::AssociationMode::nearest_wins;
    } else {
        throw bpj::DataError("unknown --association-mode '" + o.association_mode +
                             "' (confidence, nearest)");
    }
    config.contact_weight_part = o.contact_wh;
    config.contact_weight_body = o.contact_wb;

    echo_config("decode",
                {{"body_conf", config.body_conf},
                 {"body_iou", config.body_iou},
                 {"part_conf", config.part_conf},
                 {"part_iou", config.part_iou},
                 {"inner_iou", config.inner_iou},
                 {"max_detections", config.max_detections},
                 {"require_association",
                  config.require_association ? json(*config.require_association) : json(nullptr)},
                 {"association_mode", o.association_mode},
                 {"contact_weight_part", config.contact_weight_part},
                 {"contact_weight_body", config.contact_weight_body},
                 {"workers", o.workers}});

    const bpj::GridDump dump = bpj::read_grid_dump(o.grids_path);
    if (o.spec_path) {
        const bpj::GridSpec file_spec = bpj::read_spec(*o.spec_path);
        if (bpj::spec_to_json(file_spec) != bpj::spec_to_json(dump.spec)) {
            throw bpj::DataError("spec file " + *o.spec_path +
                                 " does not match the header of " + o.grids_path);
        }
    }
    config.validate(dump.spec);

    std::vector<bpj::DecodeStats> stats;
    const auto records =
        bpj::decode_batch(dump.images, dump.spec, config, dump.image_ids, o.workers, &stats);
    write_ndjson_output(o.out, records, bpj::detection_to_line);

    long bodies = 0, parts = 0, extra = 0;
    for (const bpj::DetectionRecord& r : records) {
        bodies += static_cast<long>(r.bodies.size());
        extra += static_cast<long>(r.extra_parts.size());
        for (const auto& b : r.bodies) {
            for (const auto& p : b.parts) {
                if (p) ++parts;
            }
        }
    }
    std::cerr << "decode: " << records.size() << " images, " << bodies << " bodies, " << parts
              << " associated parts, " << extra << " standalone parts\n";
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
    std::string det_path;
    std::string gt_path;
    std::string spec_path;
    std::optional<std::string> out;
    double iou = 0.5;
    int fppi_samples = 9;
    double fppi_min = 1e-2, fppi_max = 1.0;
    std::string pair_score = "body";
    std::string config_path;
};

void run_eval(const CLI::App* sub, EvalOpts& o) {
    FileConfig file(sub, o.config_path, "eval");
    file.fill("iou", o.iou);
    file.fill("fppi-samples", o.fppi_samples);
    file.fill("fppi-min", o.fppi_min);
    file.fill("fppi-max", o.fppi_max);
    file.fill("pair-score", o.pair_score);
    file.finish();

    bpj::EvalConfig config;
    config.protocol.iou_threshold = o.iou;
    config.protocol.fppi_samples = o.fppi_samples;
    config.protocol.fppi_min = o.fppi_min;
    config.protocol.fppi_max = o.fppi_max;
    config.pair_score = bpj::pair_score_mode_from_name(o.pair_score);
    config.protocol.validate();

    echo_config("eval", {{"iou_threshold", config.protocol.iou_threshold},
                         {"fppi_samples", config.protocol.fppi_samples},
                         {"fppi_min", config.protocol.fppi_min},
                         {"fppi_max", config.protocol.fppi_max},
                         {"pair_score", o.pair_score}});

    const bpj::GridSpec spec = bpj::read_spec(o.spec_path);
    const std::vector<bpj::Scene> scenes = bpj::read_scenes(o.gt_path);
    const std::vector<bpj::DetectionRecord> dets = bpj::read_detections(o.det_path);
    const bpj::EvalReport report = bpj::evaluate(scenes, dets, spec, config);
    write_text_output(o.out, bpj::eval_report_to_json(report) + "\n");
}

// ---------------------------------------------------------------------------
// report rendering

std::string render_text_report(const json& r) {
    std::ostringstream out;
    const json& cfg = r.at("config");
    out << "Evaluation over " << r.at("images").get<int>() << " images\n";
    out << "  protocol: IoU >= " << format_fixed(cfg.at("iou_threshold").get<double>(), 2)
        << ", FPPI grid " << cfg.at("fppi_samples").get<int>() << " points in ["
        << cfg.at("fppi_min").get<double>() << ", " << cfg.at("fppi_max").get<double>()
        << "], pair score: " << cfg.at("pair_score").get<std::string>() << "\n\n";

    const json& body = r.at("body");
    auto opt_num = [](const json& v) -> std::optional<double> {
        if (v.is_null()) return std::nullopt;
        return v.get<double>();
    };
    out << "  bodies: AP " << format_opt(opt_num(body.at("ap"))) << "   MR^-2 "
        << format_opt(opt_num(body.at("mr2").at("value"))) << "   (positives "
        << body.at("positives").get<long>() << ", detections " << body.at("detections").get<long>()
        << ", true positives " << body.at("true_positives").get<long>() << ")\n\n";

    const json& slots = r.at("slots");
    if (!slots.empty()) {
        out << "  slot   AP        mMR^-2    joint AP  cond.acc    positives  detections\n";
        for (const json& s : slots) {
            char line[160];
            const std::string ap = format_opt(opt_num(s.at("ap")));
            const std::string mmr2 = format_opt(opt_num(s.at("mmr2").at("value")));
            const std::string joint = format_opt(opt_num(s.at("joint_ap")));
            const std::string cond =
                s.at("cond_accuracy").is_null()
                    ? std::string("n/a")
                    : format_fixed(s.at("cond_accuracy").get<double>(), 2) + "%";
            std::snprintf(line, sizeof(line), "  %-6d %-9s %-9s %-9s %-11s %-10ld %ld\n",
                          s.at("slot").get<int>(), ap.c_str(), mmr2.c_str(), joint.c_str(),
                          cond.c_str(), s.at("positives").get<long>(),
                          s.at("detections").get<long>());
            out << line;
        }
        out << "  mean mMR^-2: " << format_opt(opt_num(r.at("mmr2_mean"))) << "\n";
    }
    if (r.contains("contact")) {
        const json& c = r.at("contact");
        out << "\n  contact state AP (positives):";
        for (int s = 0; s < 4; ++s) {
            out << " s" << s << " " << format_opt(opt_num(c.at("state_ap").at(s))) << " ("
                << c.at("positives").at(s).get<long>() << ")";
        }
        out << "\n  contact mean AP: " << format_opt(opt_num(c.at("mean_ap"))) << "\n";
    }
    return out.str();
}

struct PlotRect {
    double x0, y0, w, h;  // y0 is the TOP of the plot area in SVG coordinates
};

const char* plot_color(std::size_t i) {
    static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                     "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
    return kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
}

void svg_frame(std::ostringstream& out, const PlotRect& rc, const std::string& title,
               const std::string& x_label, const std::string& y_label) {
    out << "<rect x='" << rc.x0 << "' y='" << rc.y0 << "' width='" << rc.w << "' height='"
        << rc.h << "' fill='none' stroke='#333'/>\n";
    out << "<text x='" << rc.x0 + rc.w / 2 << "' y='" << rc.y0 - 16
        << "' text-anchor='middle' font-size='15'>" << title << "</text>\n";
    out << "<text x='" << rc.x0 + rc.w / 2 << "' y='" << rc.y0 + rc.h + 35
        << "' text-anchor='middle' font-size='12'>" << x_label << "</text>\n";
    out << "<text x='" << rc.x0 - 40 << "' y='" << rc.y0 + rc.h / 2
        << "' text-anchor='middle' font-size='12' transform='rotate(-90 " << rc.x0 - 40 << " "
        << rc.y0 + rc.h / 2 << ")'>" << y_label << "</text>\n";
}

void svg_linear_ticks(std::ostringstream& out, const PlotRect& rc, bool x_axis) {
    for (int i = 0; i <= 4; ++i) {
        const double f = i / 4.0;
        if (x_axis) {
            const double x = rc.x0 + f * rc.w;
            out << "<line x1='" << x << "' y1='" << rc.y0 << "' x2='" << x << "' y2='"
                << rc.y0 + rc.h << "' stroke='#ddd'/>\n";
            out << "<text x='" << x << "' y='" << rc.y0 + rc.h + 16
                << "' text-anchor='middle' font-size='11'>" << format_fixed(f, 2) << "</text>\n";
        } else {
            const double y = rc.y0 + rc.h - f * rc.h;
            out << "<line x1='" << rc.x0 << "' y1='" << y << "' x2='" << rc.x0 + rc.w << "' y2='"
                << y << "' stroke='#ddd'/>\n";
            out << "<text x='" << rc.x0 - 6 << "' y='" << y + 4
                << "' text-anchor='end' font-size='11'>" << format_fixed(f, 2) << "</text>\n";
        }
    }
}

void svg_polyline(std::ostringstream& out, const std::vector<std::array<double, 2>>& pts,
                  const char* color) {
    if (pts.empty()) return;
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.6' points='";
    for (const auto& p : pts) {
        out << format_fixed(p[0], 1) << "," << format_fixed(p[1], 1) << " ";
    }
    out << "'/>\n";
}

void svg_legend(std::ostringstream& out, const PlotRect& rc,
                const std::vector<std::pair<std::string, const char*>>& entries) {
    double y = rc.y0 + 14;
    for (const auto& [label, color] : entries) {
        const double x = rc.x0 + rc.w - 110;
        out << "<line x1='" << x << "' y1='" << y - 4 << "' x2='" << x + 22 << "' y2='" << y - 4
            << "' stroke='" << color << "' stroke-width='2'/>\n";
        out << "<text x='" << x + 28 << "' y='" << y << "' font-size='11'>" << label
            << "</text>\n";
        y += 15;
    }
}

std::string render_svg_report(const json& r) {
    std::ostringstream out;
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='980' height='430' "
           "font-family='sans-serif'>\n";
    out << "<rect width='980' height='430' fill='white'/>\n";

    const PlotRect pr{70, 50, 370, 300};
    const PlotRect mr{580, 50, 370, 300};
    svg_frame(out, pr, "Precision / recall", "recall", "precision");
    svg_frame(out, mr, "Miss rate vs FPPI", "false positives per image (log)", "miss rate");
    svg_linear_ticks(out, pr, true);
    svg_linear_ticks(out, pr, false);
    svg_linear_ticks(out, mr, false);

    // curve sources: bodies plus one entry per part slot
    std::vector<std::pair<std::string, const json*>> sources;
    sources.emplace_back("bodies", &r.at("body"));
    for (const json& s : r.at("slots")) {
        sources.emplace_back("slot " + std::to_string(s.at("slot").get<int>()), &s);
    }

    // precision/recall panel
    std::vector<std::pair<std::string, const char*>> legend;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const json& curve = sources[i].second->at("pr_curve");
        std::vector<std::array<double, 2>> pts;
        for (const json& p : curve) {
            // entries are [score, recall, precision]
            pts.push_back({pr.x0 + p.at(1).get<double>() * pr.w,
                           pr.y0 + pr.h - p.at(2).get<double>() * pr.h});
        }
        svg_polyline(out, pts, plot_color(i));
        legend.emplace_back(sources[i].first, plot_color(i));
    }
    svg_legend(out, pr, legend);

    // miss-rate panel, log-scaled FPPI axis
    double fmin = 1e9, fmax = 0.0;
    auto curve_of = [](const json& source) -> const json& {
        return source.contains("mr2") ? source.at("mr2").at("fppi_curve")
                                      : source.at("mmr2").at("fppi_curve");
    };
    for (const auto& [label, source] : sources) {
        (void)label;
        for (const json& p : curve_of(*source)) {
            const double f = p.at(0).get<double>();
            if (f > 0.0) {
                fmin = std::min(fmin, f);
                fmax = std::max(fmax, f);
            }
        }
    }
    if (fmax <= 0.0) {
        fmin = 1e-2;
        fmax = 1.0;
    }
    fmin = std::min(fmin, fmax / 10.0);
    const double lmin = std::log10(fmin), lmax = std::log10(fmax);
    auto fppi_x = [&](double f) {
        if (f <= fmin) return mr.x0;
        return mr.x0 + (std::log10(f) - lmin) / (lmax - lmin) * mr.w;
    };
    for (int e = static_cast<int>(std::ceil(lmin)); e <= static_cast<int>(std::floor(lmax)); ++e) {
        const double x = fppi_x(std::pow(10.0, e));
        out << "<line x1='" << x << "' y1='" << mr.y0 << "' x2='" << x << "' y2='"
            << mr.y0 + mr.h << "' stroke='#ddd'/>\n";
        out << "<text x='" << x << "' y='" << mr.y0 + mr.h + 16
            << "' text-anchor='middle' font-size='11'>1e" << e << "</text>\n";
    }
    for (std::size_t i = 0; i < sources.size(); ++i) {
        std::vector<std::array<double, 2>> pts;
        for (const json& p : curve_of(*sources[i].second)) {
            pts.push_back(
                {fppi_x(p.at(0).get<double>()), mr.y0 + mr.h - p.at(1).get<double>() * mr.h});
        }
        svg_polyline(out, pts, plot_color(i));
    }
    svg_legend(out, mr, legend);

    out << "</svg>\n";
    return out.str();
}

struct ReportOpts {
    std::string in_path;
    std::optional<std::string> out;
    std::optional<std::string> svg_path;
};

void run_report(const ReportOpts& o) {
    const json r = load_json_file(o.in_path);
    try {
        write_text_output(o.out, render_text_report(r));
        if (o.svg_path) {
            std::ofstream f(*o.svg_path, std::ios::binary);
            if (!f) throw bpj::DataError("cannot open output file " + *o.svg_path);
            f << render_svg_report(r);
        }
    } catch (const json::exception& e) {
        throw bpj::DataError("report " + o.in_path + " is not an evaluation report: " + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint body/body-part detection engine: synthetic scenes, target grids, losses, "
                 "decoding, and evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "bpjkit 0.1.0");

    SynthOpts so;
    CLI::App* synth = app.add_subcommand("synth", "Generate synthetic scenes and optional grids");
    synth->add_option("--preset", so.preset, "Part layout preset name")->capture_default_str();
    synth->add_option("--layout", so.layout_path, "Part layout JSON file (overrides --preset)");
    synth->add_option("--n", so.n, "Number of scenes")->capture_default_str();
    synth->add_option("--seed", so.seed, "Generator seed")->capture_default_str();
    synth->add_option("--width", so.width, "Image width")->capture_default_str();
    synth->add_option("--height", so.height, "Image height")->capture_default_str();
    synth->add_option("--min-bodies", so.min_bodies, "Fewest bodies per scene")
        ->capture_default_str();
    synth->add_option("--max-bodies", so.max_bodies, "Most bodies per scene")
        ->capture_default_str();
    synth->add_option("--min-body-w", so.min_body_w, "Smallest body width, px")
        ->capture_default_str();
    synth->add_option("--max-body-w", so.max_body_w, "Largest body width, px")
        ->capture_default_str();
    synth->add_option("--max-aspect", so.max_aspect, "Max body height/width ratio")
        ->capture_default_str();
    synth->add_option("--occlusion-cap", so.occlusion_cap, "Highest allowed body-pair IoU")
        ->capture_default_str();
    synth->add_option("--visibility", so.visibility,
                      "Override every slot's visibility probability");
    synth->add_option("--contact-positive", so.contact_positive,
                      "Per contact channel: P(state 1)")
        ->capture_default_str();
    synth->add_option("--contact-unsure", so.contact_unsure, "Per contact channel: P(state 2)")
        ->capture_default_str();
    synth->add_option("--sigma-box", so.sigma_box, "Gaussian sigma on raw box channels")
        ->capture_default_str();
    synth->add_option("--sigma-offset", so.sigma_offset, "Gaussian sigma on raw offset channels")
        ->capture_default_str();
    synth->add_option("--sigma-score", so.sigma_score, "Gaussian sigma on raw score channels")
        ->capture_default_str();
    synth->add_option("--fn-rate", so.fn_rate, "Probability a body is muted from the rendering")
        ->capture_default_str();
    synth->add_option("--fp-body-rate", so.fp_body_rate, "Spurious body rate per real body")
        ->capture_default_str();
    synth->add_option("--fp-part-rate", so.fp_part_rate, "Spurious part rate per visible part")
        ->capture_default_str();
    synth->add_option("--noise-seed", so.noise_seed, "Seed for the rendering noise streams")
        ->capture_default_str();
    synth->add_option("--out", so.out, "Scene NDJSON path (default: stdout)");
    synth->add_option("--grids", so.grids_out, "Also write rendered prediction grids here");
    synth->add_option("--targets", so.targets_out, "Also write assigned target grids here");
    synth->add_option("--spec-out", so.spec_out, "Also write the grid spec JSON here");
    synth->add_option("--workers", so.workers, "Worker threads (0 = auto)")
        ->capture_default_str();
    synth->add_option("--config", so.config_path, "JSON config file (flags win)");
    synth->callback([&] { run_synth(synth, so); });

    AssignOpts ao;
    CLI::App* assign = app.add_subcommand("assign", "Encode ground-truth scenes as target grids");
    assign->add_option("--scenes", ao.scenes_path, "Scene NDJSON input")->required();
    assign->add_option("--spec", ao.spec_path, "Grid spec JSON")->required();
    assign->add_option("--out", ao.out, "Target grid dump output path")->required();
    assign->add_option("--neighbor-cells", ao.neighbor_cells, "Extra responsible cells (0, 2, 4)")
        ->capture_default_str();
    assign
        ->add_option("--offsets-at-neighbors", ao.offsets_at_neighbors,
                     "Write offset targets at neighbour cells too")
        ->capture_default_str();
    assign->add_option("--min-size", ao.min_size, "Skip objects smaller than this, px")
        ->capture_default_str();
    assign->add_option("--anchor-ratio-max", ao.anchor_ratio_max, "Anchor match ratio bound")
        ->capture_default_str();
    assign->add_option("--workers", ao.workers, "Worker threads (0 = auto)")
        ->capture_default_str();
    assign->add_option("--config", ao.config_path, "JSON config file (flags win)");
    assign->callback([&] { run_assign(assign, ao); });

    LossOpts lo;
    CLI::App* loss = app.add_subcommand("loss", "Score prediction grids against target grids");
    loss->add_option("--pred", lo.pred_path, "Prediction grid dump")->required();
    loss->add_option("--targets", lo.targets_path, "Target grid dump")->required();
    loss->add_option("--out", lo.out, "Report JSON path (default: stdout)");
    loss->add_option("--alpha", lo.alpha, "Box term weight")->capture_default_str();
    loss->add_option("--beta", lo.beta, "Objectness term weight")->capture_default_str();
    loss->add_option("--gamma", lo.gamma, "Class term weight")->capture_default_str();
    loss->add_option("--lambda", lo.lambda, "Body-part offset term weight")
        ->capture_default_str();
    loss->add_option("--mu", lo.mu, "Contact term weight")->capture_default_str();
    loss->add_option("--stride-weights", lo.stride_weights,
                     "Per-stride objectness weights, comma separated")
        ->delimiter(',')
        ->capture_default_str();
    loss->add_option("--batch-size", lo.batch_size, "Batch scale on the total")
        ->capture_default_str();
    loss->add_option("--obj-target", lo.obj_target, "Objectness target mode: ciou or binary")
        ->capture_default_str();
    loss->add_option("--alpha-free", lo.alpha_free, "Anchor-free box weight")
        ->capture_default_str();
    loss->add_option("--gamma-free", lo.gamma_free, "Anchor-free class weight")
        ->capture_default_str();
    loss->add_option("--lambda-free", lo.lambda_free,
                     "Anchor-free offset weight (default: 1/k)");
    loss->add_option("--config", lo.config_path, "JSON config file (flags win)");
    loss->callback([&] { run_loss(loss, lo); });

    DecodeOpts deco;
    CLI::App* decode = app.add_subcommand("decode", "Decode prediction grids into detections");
    decode->add_option("--grids", deco.grids_path, "Prediction grid dump")->required();
    decode->add_option("--spec", deco.spec_path,
                       "Grid spec JSON; must match the dump header when given");
    decode->add_option("--out", deco.out, "Detection NDJSON path (default: stdout)");
    decode->add_option("--tb-conf", deco.tb_conf, "Body confidence floor")->capture_default_str();
    decode->add_option("--tb-iou", deco.tb_iou, "Body NMS IoU threshold")->capture_default_str();
    decode->add_option("--tp-conf", deco.tp_conf, "Part confidence floor")->capture_default_str();
    decode->add_option("--tp-iou", deco.tp_iou, "Part NMS IoU threshold")->capture_default_str();
    decode->add_option("--inner-iou", deco.inner_iou, "Association gate on inner IoU")
        ->capture_default_str();
    decode->add_option("--max-detections", deco.max_detections, "Cap per image per NMS group")
        ->capture_default_str();
    decode->add_option("--require-association", deco.require_association,
                       "Drop bodies whose given slot stays empty");
    decode->add_option("--association-mode", deco.association_mode,
                       "Slot contest rule: confidence or nearest")
        ->capture_default_str();
    decode->add_option("--contact-wh", deco.contact_wh, "Contact fusion weight, part side")
        ->capture_default_str();
    decode->add_option("--contact-wb", deco.contact_wb, "Contact fusion weight, body side")
        ->capture_default_str();
    decode->add_option("--workers", deco.workers, "Worker threads (0 = auto)")
        ->capture_default_str();
    decode->add_option("--config", deco.config_path, "JSON config file (flags win)");
    decode->callback([&] { run_decode(decode, deco); });

    EvalOpts eo;
    CLI::App* eval = app.add_subcommand("eval", "Score detections against ground truth");
    eval->add_option("--det", eo.det_path, "Detection NDJSON")->required();
    eval->add_option("--gt", eo.gt_path, "Ground-truth scene NDJSON")->required();
    eval->add_option("--spec", eo.spec_path, "Grid spec JSON")->required();
    eval->add_option("--out", eo.out, "Report JSON path (default: stdout)");
    eval->add_option("--iou", eo.iou, "Match IoU threshold")->capture_default_str();
    eval->add_option("--fppi-samples", eo.fppi_samples, "Log-spaced FPPI sample count")
        ->capture_default_str();
    eval->add_option("--fppi-min", eo.fppi_min, "Lowest FPPI sample")->capture_default_str();
    eval->add_option("--fppi-max", eo.fppi_max, "Highest FPPI sample")->capture_default_str();
    eval->add_option("--pair-score", eo.pair_score, "Pair ranking score: body, min, or part")
        ->capture_default_str();
    eval->add_option("--config", eo.config_path, "JSON config file (flags win)");
    eval->callback([&] { run_eval(eval, eo); });

    ReportOpts ro;
    CLI::App* report = app.add_subcommand("report", "Render an evaluation report");
    report->add_option("--in", ro.in_path, "Evaluation report JSON")->required();
    report->add_option("--out", ro.out, "Text report path (default: stdout)");
    report->add_option("--svg", ro.svg_path, "Also write curve plots as SVG here");
    report->callback([&] { run_report(ro); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help / --version
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\nRun with --help for usage.\n";
        return 1;
    } catch (const bpj::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
