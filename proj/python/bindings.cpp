// Python bindings for the joint body/body-part detection engine.  Exposes the
// main operations: scene generation, target assignment, loss computation,
// grid decoding, evaluation, and the file formats.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "bpj/assigner.hpp"
#include "bpj/common.hpp"
#include "bpj/decoder.hpp"
#include "bpj/geometry.hpp"
#include "bpj/grid_spec.hpp"
#include "bpj/io.hpp"
#include "bpj/losses.hpp"
#include "bpj/metrics.hpp"
#include "bpj/pipeline.hpp"
#include "bpj/scene.hpp"
#include "bpj/synth.hpp"
#include "bpj/transforms.hpp"

namespace py = pybind11;

namespace {

nlohmann::json parse_json(const std::string& text, const char* what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw bpj::DataError(std::string(what) + ": " + e.what());
    }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Joint body/body-part detection engine: grid encoding, multi-task losses, "
              "decoding with association, detection metrics, and synthetic scenes.";

    py::register_exception<bpj::DataError>(m, "DataError");

    // ---------------------------------------------------------------- geometry
    py::class_<bpj::Box>(m, "Box")
        .def(py::init<>())
        .def(py::init([](double x1, double y1, double x2, double y2) {
                 return bpj::Box{x1, y1, x2, y2};
             }),
             py::arg("x1"), py::arg("y1"), py::arg("x2"), py::arg("y2"))
        .def_readwrite("x1", &bpj::Box::x1)
        .def_readwrite("y1", &bpj::Box::y1)
        .def_readwrite("x2", &bpj::Box::x2)
        .def_readwrite("y2", &bpj::Box::y2)
        .def("width", &bpj::Box::width)
        .def("height", &bpj::Box::height)
        .def("area", &bpj::Box::area)
        .def("cx", &bpj::Box::cx)
        .def("cy", &bpj::Box::cy)
        .def_static("from_center", &bpj::Box::from_center, py::arg("cx"), py::arg("cy"),
                    py::arg("w"), py::arg("h"))
        .def("__eq__", [](const bpj::Box& a, const bpj::Box& b) { return a == b; })
        .def("__repr__", [](const bpj::Box& b) {
            std::ostringstream out;
            out << "Box(" << b.x1 << ", " << b.y1 << ", " << b.x2 << ", " << b.y2 << ")";
            return out.str();
        });
    m.def("iou", &bpj::iou, py::arg("a"), py::arg("b"), "Intersection over union.");
    m.def("inner_iou", &bpj::inner_iou, py::arg("body"), py::arg("part"),
          "Intersection over the part's own area (containment ratio).");

    // ---------------------------------------------------------------- grid spec
    py::enum_<bpj::Variant>(m, "Variant")
        .value("anchor_based", bpj::Variant::anchor_based)
        .value("anchor_free", bpj::Variant::anchor_free)
        .value("anchor_based_contact", bpj::Variant::anchor_based_contact);

    py::class_<bpj::Anchor>(m, "Anchor")
        .def(py::init<>())
        .def(py::init([](double w, double h) { return bpj::Anchor{w, h}; }), py::arg("w"),
             py::arg("h"))
        .def_readwrite("w", &bpj::Anchor::w)
        .def_readwrite("h", &bpj::Anchor::h);

    py::class_<bpj::GridSpec>(m, "GridSpec")
        .def(py::init<>())
        .def_readwrite("strides", &bpj::GridSpec::strides)
        .def_readwrite("anchors", &bpj::GridSpec::anchors)
        .def_readwrite("part_count", &bpj::GridSpec::part_count)
        .def_readwrite("part_labels", &bpj::GridSpec::part_labels)
        .def_readwrite("variant", &bpj::GridSpec::variant)
        .def_readwrite("image_w", &bpj::GridSpec::image_w)
        .def_readwrite("image_h", &bpj::GridSpec::image_h)
        .def_readwrite("contact_slots", &bpj::GridSpec::contact_slots)
        .def("anchors_per_stride", &bpj::GridSpec::anchors_per_stride)
        .def("channels", &bpj::GridSpec::channels)
        .def("has_objectness", &bpj::GridSpec::has_objectness)
        .def("has_contact", &bpj::GridSpec::has_contact)
        .def("grid_w", &bpj::GridSpec::grid_w, py::arg("stride"))
        .def("grid_h", &bpj::GridSpec::grid_h, py::arg("stride"))
        .def("validate", &bpj::GridSpec::validate)
        .def("to_json", [](const bpj::GridSpec& s) { return bpj::spec_to_json(s).dump(2); })
        .def_static("from_json", [](const std::string& text) {
            return bpj::spec_from_json(parse_json(text, "grid spec"));
        })
        .def_static("default_anchors", &bpj::GridSpec::default_anchors, py::arg("strides"));
    m.def("read_spec", &bpj::read_spec, py::arg("path"));
    m.def("write_spec", &bpj::write_spec, py::arg("path"), py::arg("spec"));

    py::class_<bpj::ChannelLayout>(m, "ChannelLayout")
        .def_readonly("total", &bpj::ChannelLayout::total)
        .def_readonly("obj", &bpj::ChannelLayout::obj)
        .def_readonly("box", &bpj::ChannelLayout::box)
        .def_readonly("cls", &bpj::ChannelLayout::cls)
        .def_readonly("off", &bpj::ChannelLayout::off)
        .def_readonly("contact", &bpj::ChannelLayout::contact)
        .def_readonly("names", &bpj::ChannelLayout::names)
        .def("cls_channel", &bpj::ChannelLayout::cls_channel, py::arg("class_index"))
        .def("offset_x", &bpj::ChannelLayout::offset_x, py::arg("slot"))
        .def("offset_y", &bpj::ChannelLayout::offset_y, py::arg("slot"))
        .def("contact_channel", &bpj::ChannelLayout::contact_channel, py::arg("group"),
             py::arg("state"));
    m.def("channel_layout", &bpj::channel_layout, py::arg("spec"));

    py::class_<bpj::GridTensor>(m, "GridTensor")
        .def(py::init<>())
        .def_static("zeros", &bpj::GridTensor::zeros, py::arg("spec"), py::arg("stride"))
        .def_readwrite("stride", &bpj::GridTensor::stride)
        .def_readwrite("anchors", &bpj::GridTensor::anchors)
        .def_readwrite("channels", &bpj::GridTensor::channels)
        .def_readwrite("height", &bpj::GridTensor::height)
        .def_readwrite("width", &bpj::GridTensor::width)
        .def_readwrite("values", &bpj::GridTensor::values)
        .def("at",
             [](const bpj::GridTensor& t, int anchor, int channel, int row, int col) {
                 return t.at(anchor, channel, row, col);
             },
             py::arg("anchor"), py::arg("channel"), py::arg("row"), py::arg("col"))
        .def("set",
             [](bpj::GridTensor& t, int anchor, int channel, int row, int col, float v) {
                 t.at(anchor, channel, row, col) = v;
             },
             py::arg("anchor"), py::arg("channel"), py::arg("row"), py::arg("col"),
             py::arg("value"))
        .def("__len__", &bpj::GridTensor::size);

    // ---------------------------------------------------------------- scenes
    py::class_<bpj::PartAnnotation>(m, "PartAnnotation")
        .def(py::init<>())
        .def_readwrite("box", &bpj::PartAnnotation::box)
        .def_readwrite("visible", &bpj::PartAnnotation::visible)
        .def_readwrite("contact", &bpj::PartAnnotation::contact);

    py::class_<bpj::BodyAnnotation>(m, "BodyAnnotation")
        .def(py::init<>())
        .def_readwrite("body_id", &bpj::BodyAnnotation::body_id)
        .def_readwrite("box", &bpj::BodyAnnotation::box)
        .def_readwrite("parts", &bpj::BodyAnnotation::parts);

    py::class_<bpj::Scene>(m, "Scene")
        .def(py::init<>())
        .def_readwrite("image_id", &bpj::Scene::image_id)
        .def_readwrite("width", &bpj::Scene::width)
        .def_readwrite("height", &bpj::Scene::height)
        .def_readwrite("bodies", &bpj::Scene::bodies)
        .def("validate", &bpj::Scene::validate, py::arg("spec"))
        .def("to_line", &bpj::scene_to_line);

    m.def("read_scenes", &bpj::read_scenes, py::arg("path"));
    m.def("write_scenes", &bpj::write_scenes, py::arg("path"), py::arg("scenes"));
    m.def("scenes_from_ndjson", [](const std::string& text) {
        std::istringstream in(text);
        return bpj::read_scenes_stream(in, "<string>");
    });

    // ---------------------------------------------------------------- detections
    py::class_<bpj::AssociatedPart>(m, "AssociatedPart")
        .def(py::init<>())
        .def_readwrite("box", &bpj::AssociatedPart::box)
        .def_readwrite("score", &bpj::AssociatedPart::score)
        .def_readwrite("cx", &bpj::AssociatedPart::cx)
        .def_readwrite("cy", &bpj::AssociatedPart::cy)
        .def_readwrite("contact_scores", &bpj::AssociatedPart::contact_scores);

    py::class_<bpj::AssociatedDetection>(m, "AssociatedDetection")
        .def(py::init<>())
        .def_readwrite("box", &bpj::AssociatedDetection::box)
        .def_readwrite("score", &bpj::AssociatedDetection::score)
        .def_readwrite("parts", &bpj::AssociatedDetection::parts);

    py::class_<bpj::UnassociatedPart>(m, "UnassociatedPart")
        .def(py::init<>())
        .def_readwrite("slot", &bpj::UnassociatedPart::slot)
        .def_readwrite("box", &bpj::UnassociatedPart::box)
        .def_readwrite("score", &bpj::UnassociatedPart::score);

    py::class_<bpj::DetectionRecord>(m, "DetectionRecord")
        .def(py::init<>())
        .def_readwrite("image_id", &bpj::DetectionRecord::image_id)
        .def_readwrite("bodies", &bpj::DetectionRecord::bodies)
        .def_readwrite("extra_parts", &bpj::DetectionRecord::extra_parts)
        .def("to_line", &bpj::detection_to_line);

    m.def("read_detections", &bpj::read_detections, py::arg("path"));
    m.def("write_detections", &bpj::write_detections, py::arg("path"), py::arg("records"));
    m.def("detections_from_ndjson", [](const std::string& text) {
        std::istringstream in(text);
        return bpj::read_detections_stream(in, "<string>");
    });

    // ---------------------------------------------------------------- grid dump
    py::class_<bpj::GridDump>(m, "GridDump")
        .def(py::init<>())
        .def_readwrite("spec", &bpj::GridDump::spec)
        .def_readwrite("image_ids", &bpj::GridDump::image_ids)
        .def_readwrite("kind", &bpj::GridDump::kind)
        .def_readwrite("images", &bpj::GridDump::images);
    m.def("read_grid_dump", &bpj::read_grid_dump, py::arg("path"));
    m.def("write_grid_dump", &bpj::write_grid_dump, py::arg("path"), py::arg("dump"));

    // ---------------------------------------------------------------- assignment
    py::class_<bpj::AssignConfig>(m, "AssignConfig")
        .def(py::init<>())
        .def_readwrite("neighbor_cells", &bpj::AssignConfig::neighbor_cells)
        .def_readwrite("offsets_at_neighbors", &bpj::AssignConfig::offsets_at_neighbors)
        .def_readwrite("min_size", &bpj::AssignConfig::min_size)
        .def_readwrite("anchor_ratio_max", &bpj::AssignConfig::anchor_ratio_max);

    py::class_<bpj::AssignStats>(m, "AssignStats")
        .def_readonly("collisions", &bpj::AssignStats::collisions)
        .def_readonly("dropped_offsets", &bpj::AssignStats::dropped_offsets)
        .def_readonly("skipped_objects", &bpj::AssignStats::skipped_objects)
        .def_readonly("unmatched_objects", &bpj::AssignStats::unmatched_objects);

    py::class_<bpj::AssignResult>(m, "AssignResult")
        .def_readonly("targets", &bpj::AssignResult::targets)
        .def_readonly("stats", &bpj::AssignResult::stats);

    m.def("assign", &bpj::assign, py::arg("scene"), py::arg("spec"),
          py::arg("config") = bpj::AssignConfig{});
    m.def("assign_batch", &bpj::assign_batch, py::arg("scenes"), py::arg("spec"),
          py::arg("config") = bpj::AssignConfig{}, py::arg("workers") = 0);

    // ---------------------------------------------------------------- losses
    py::enum_<bpj::ObjTargetMode>(m, "ObjTargetMode")
        .value("ciou", bpj::ObjTargetMode::ciou)
        .value("binary", bpj::ObjTargetMode::binary);

    py::class_<bpj::LossConfig>(m, "LossConfig")
        .def(py::init<>())
        .def_readwrite("alpha", &bpj::LossConfig::alpha)
        .def_readwrite("beta", &bpj::LossConfig::beta)
        .def_readwrite("gamma", &bpj::LossConfig::gamma)
        .def_readwrite("lambda_", &bpj::LossConfig::lambda)
        .def_readwrite("mu", &bpj::LossConfig::mu)
        .def_readwrite("stride_weights", &bpj::LossConfig::stride_weights)
        .def_readwrite("batch_size", &bpj::LossConfig::batch_size)
        .def_readwrite("obj_target_mode", &bpj::LossConfig::obj_target_mode)
        .def_readwrite("alpha_free", &bpj::LossConfig::alpha_free)
        .def_readwrite("gamma_free", &bpj::LossConfig::gamma_free)
        .def_readwrite("lambda_free", &bpj::LossConfig::lambda_free);

    py::class_<bpj::StrideLoss>(m, "StrideLoss")
        .def_readonly("stride", &bpj::StrideLoss::stride)
        .def_readonly("box", &bpj::StrideLoss::box)
        .def_readonly("obj", &bpj::StrideLoss::obj)
        .def_readonly("cls", &bpj::StrideLoss::cls)
        .def_readonly("bpd", &bpj::StrideLoss::bpd)
        .def_readonly("cts", &bpj::StrideLoss::cts)
        .def_readonly("matched_cells", &bpj::StrideLoss::matched_cells)
        .def_readonly("total_cells", &bpj::StrideLoss::total_cells)
        .def_readonly("offset_pairs", &bpj::StrideLoss::offset_pairs)
        .def_readonly("contact_groups", &bpj::StrideLoss::contact_groups);

    py::class_<bpj::LossReport>(m, "LossReport")
        .def_readonly("box", &bpj::LossReport::box)
        .def_readonly("obj", &bpj::LossReport::obj)
        .def_readonly("cls", &bpj::LossReport::cls)
        .def_readonly("bpd", &bpj::LossReport::bpd)
        .def_readonly("cts", &bpj::LossReport::cts)
        .def_readonly("total", &bpj::LossReport::total)
        .def_readonly("per_stride", &bpj::LossReport::per_stride);

    m.def("compute_losses", &bpj::compute_losses, py::arg("pred"), py::arg("target"),
          py::arg("spec"), py::arg("config") = bpj::LossConfig{});
    m.def("loss_report_json",
          [](const bpj::LossReport& report, const bpj::GridSpec& spec,
             const bpj::LossConfig& config) {
              return bpj::loss_report_to_json(report, spec, config).dump(2);
          },
          py::arg("report"), py::arg("spec"), py::arg("config") = bpj::LossConfig{});

    // ---------------------------------------------------------------- decoding
    py::enum_<bpj::AssociationMode>(m, "AssociationMode")
        .value("confidence", bpj::AssociationMode::confidence)
        .value("nearest_wins", bpj::AssociationMode::nearest_wins);

    py::class_<bpj::DecodeConfig>(m, "DecodeConfig")
        .def(py::init<>())
        .def_readwrite("body_conf", &bpj::DecodeConfig::body_conf)
        .def_readwrite("body_iou", &bpj::DecodeConfig::body_iou)
        .def_readwrite("part_conf", &bpj::DecodeConfig::part_conf)
        .def_readwrite("part_iou", &bpj::DecodeConfig::part_iou)
        .def_readwrite("inner_iou", &bpj::DecodeConfig::inner_iou)
        .def_readwrite("max_detections", &bpj::DecodeConfig::max_detections)
        .def_readwrite("require_association", &bpj::DecodeConfig::require_association)
        .def_readwrite("association_mode", &bpj::DecodeConfig::association_mode)
        .def_readwrite("contact_weight_part", &bpj::DecodeConfig::contact_weight_part)
        .def_readwrite("contact_weight_body", &bpj::DecodeConfig::contact_weight_body);

    m.def("decode_image",
          [](const std::vector<bpj::GridTensor>& grids, const bpj::GridSpec& spec,
             const bpj::DecodeConfig& config, const std::string& image_id) {
              return bpj::decode_image(grids, spec, config, image_id);
          },
          py::arg("grids"), py::arg("spec"), py::arg("config") = bpj::DecodeConfig{},
          py::arg("image_id") = std::string("image"));
    m.def("decode_batch",
          [](const std::vector<std::vector<bpj::GridTensor>>& image_grids,
             const bpj::GridSpec& spec, const bpj::DecodeConfig& config,
             const std::vector<std::string>& image_ids, int workers) {
              return bpj::decode_batch(image_grids, spec, config, image_ids, workers);
          },
          py::arg("image_grids"), py::arg("spec"), py::arg("config") = bpj::DecodeConfig{},
          py::arg("image_ids") = std::vector<std::string>{}, py::arg("workers") = 0);

    // ---------------------------------------------------------------- metrics
    py::enum_<bpj::PairScoreMode>(m, "PairScoreMode")
        .value("body", bpj::PairScoreMode::body)
        .value("min_body_part", bpj::PairScoreMode::min_body_part)
        .value("part", bpj::PairScoreMode::part);

    py::class_<bpj::MatchProtocol>(m, "MatchProtocol")
        .def(py::init<>())
        .def_readwrite("iou_threshold", &bpj::MatchProtocol::iou_threshold)
        .def_readwrite("fppi_samples", &bpj::MatchProtocol::fppi_samples)
        .def_readwrite("fppi_min", &bpj::MatchProtocol::fppi_min)
        .def_readwrite("fppi_max", &bpj::MatchProtocol::fppi_max);

    py::class_<bpj::EvalConfig>(m, "EvalConfig")
        .def(py::init<>())
        .def_readwrite("protocol", &bpj::EvalConfig::protocol)
        .def_readwrite("pair_score", &bpj::EvalConfig::pair_score);

    m.def("evaluate_json",
          [](const std::vector<bpj::Scene>& scenes,
             const std::vector<bpj::DetectionRecord>& detections, const bpj::GridSpec& spec,
             const bpj::EvalConfig& config) {
              return bpj::eval_report_to_json(bpj::evaluate(scenes, detections, spec, config));
          },
          py::arg("scenes"), py::arg("detections"), py::arg("spec"),
          py::arg("config") = bpj::EvalConfig{},
          "Scores detections against ground truth; returns the full report as a JSON string.");

    // ---------------------------------------------------------------- synthesis
    py::class_<bpj::SlotModel>(m, "SlotModel")
        .def(py::init<>())
        .def_readwrite("label", &bpj::SlotModel::label)
        .def_readwrite("cx_min", &bpj::SlotModel::cx_min)
        .def_readwrite("cx_max", &bpj::SlotModel::cx_max)
        .def_readwrite("cy_min", &bpj::SlotModel::cy_min)
        .def_readwrite("cy_max", &bpj::SlotModel::cy_max)
        .def_readwrite("w_min", &bpj::SlotModel::w_min)
        .def_readwrite("w_max", &bpj::SlotModel::w_max)
        .def_readwrite("h_min", &bpj::SlotModel::h_min)
        .def_readwrite("h_max", &bpj::SlotModel::h_max)
        .def_readwrite("visibility", &bpj::SlotModel::visibility);

    py::class_<bpj::PartLayout>(m, "PartLayout")
        .def(py::init<>())
        .def_readwrite("name", &bpj::PartLayout::name)
        .def_readwrite("variant", &bpj::PartLayout::variant)
        .def_readwrite("slots", &bpj::PartLayout::slots)
        .def_readwrite("contact_slots", &bpj::PartLayout::contact_slots)
        .def("k", &bpj::PartLayout::k)
        .def("validate", &bpj::PartLayout::validate)
        .def("to_json", &bpj::PartLayout::to_json)
        .def_static("from_json", &bpj::PartLayout::from_json, py::arg("text"))
        .def_static("preset", &bpj::PartLayout::preset, py::arg("name"))
        .def_static("preset_names", &bpj::PartLayout::preset_names)
        .def("make_spec", &bpj::PartLayout::make_spec, py::arg("image_w"), py::arg("image_h"));

    py::class_<bpj::NoiseModel>(m, "NoiseModel")
        .def(py::init<>())
        .def_readwrite("sigma_box", &bpj::NoiseModel::sigma_box)
        .def_readwrite("sigma_offset", &bpj::NoiseModel::sigma_offset)
        .def_readwrite("sigma_score", &bpj::NoiseModel::sigma_score)
        .def_readwrite("fn_rate", &bpj::NoiseModel::fn_rate)
        .def_readwrite("fp_body_rate", &bpj::NoiseModel::fp_body_rate)
        .def_readwrite("fp_part_rate", &bpj::NoiseModel::fp_part_rate)
        .def("validate", &bpj::NoiseModel::validate);

    py::class_<bpj::SynthConfig>(m, "SynthConfig")
        .def(py::init<>())
        .def_readwrite("seed", &bpj::SynthConfig::seed)
        .def_readwrite("n_images", &bpj::SynthConfig::n_images)
        .def_readwrite("width", &bpj::SynthConfig::width)
        .def_readwrite("height", &bpj::SynthConfig::height)
        .def_readwrite("min_bodies", &bpj::SynthConfig::min_bodies)
        .def_readwrite("max_bodies", &bpj::SynthConfig::max_bodies)
        .def_readwrite("min_body_w", &bpj::SynthConfig::min_body_w)
        .def_readwrite("max_body_w", &bpj::SynthConfig::max_body_w)
        .def_readwrite("max_aspect", &bpj::SynthConfig::max_aspect)
        .def_readwrite("occlusion_cap", &bpj::SynthConfig::occlusion_cap)
        .def_readwrite("visibility_override", &bpj::SynthConfig::visibility_override)
        .def_readwrite("contact_positive", &bpj::SynthConfig::contact_positive)
        .def_readwrite("contact_unsure", &bpj::SynthConfig::contact_unsure)
        .def_readwrite("layout", &bpj::SynthConfig::layout)
        .def("validate", &bpj::SynthConfig::validate)
        .def("make_spec", &bpj::SynthConfig::make_spec);

    m.def("gen_scene", &bpj::gen_scene, py::arg("config"), py::arg("image_index"));
    m.def("gen_scenes", &bpj::gen_scenes, py::arg("config"));
    m.def("gen_scenes_parallel", &bpj::gen_scenes_parallel, py::arg("config"),
          py::arg("workers") = 0);
    m.def("identity_prediction", &bpj::identity_prediction, py::arg("targets"), py::arg("spec"));
    m.def("render_predicted", &bpj::render_predicted, py::arg("scene"), py::arg("spec"),
          py::arg("noise"), py::arg("seed") = 0);

    // ---------------------------------------------------------------- execution
    m.def("resolve_workers", &bpj::resolve_workers, py::arg("requested") = 0,
          "Worker count after the BPJ_THREADS environment cap (0 = one per hardware thread).");
}
