#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bpj/detections.hpp"
#include "bpj/grid_spec.hpp"
#include "bpj/scene.hpp"

namespace bpj {

// ---------------------------------------------------------------------------
// JSON configuration schema for GridSpec.

nlohmann::json spec_to_json(const GridSpec& spec);
GridSpec spec_from_json(const nlohmann::json& j);
GridSpec read_spec(const std::string& path);
void write_spec(const std::string& path, const GridSpec& spec);

// ---------------------------------------------------------------------------
// Scene and detection NDJSON (UTF-8, LF, one object per line, numbers with
// at most 6 fractional digits). Readers are streaming and tolerate unknown
// keys; errors carry the file name and line number.

std::vector<Scene> read_scenes(const std::string& path);
std::vector<Scene> read_scenes_stream(std::istream& in, const std::string& name);
void write_scenes(const std::string& path, const std::vector<Scene>& scenes);
std::string scene_to_line(const Scene& scene);

std::vector<DetectionRecord> read_detections(const std::string& path);
std::vector<DetectionRecord> read_detections_stream(std::istream& in, const std::string& name);
void write_detections(const std::string& path, const std::vector<DetectionRecord>& records);
std::string detection_to_line(const DetectionRecord& record);

/// Serializes a number with at most 6 fractional digits (trailing zeros
/// trimmed) — the NDJSON numeric contract.
std::string format_number(double v);

// ---------------------------------------------------------------------------
// Binary grid dump: magic "BPJG", u32 LE version = 1, u32 LE header length,
// UTF-8 JSON header {spec, images, kind, ...}, then per image, per stride in
// ascending order, raw f32 LE values in [anchor][channel][row][column] order.
// Target dumps use NaN payload values as the in-band "unset" mask for offset
// and contact channels.

struct GridDump {
    GridSpec spec;
    std::vector<std::string> image_ids;
    std::string kind = "predictions";  // informational: "predictions" | "targets"
    /// images[i][si] is the tensor for image i at spec.strides[si].
    std::vector<std::vector<GridTensor>> images;
    /// Unknown header keys, preserved verbatim across read/write (serialized
    /// JSON object; empty when none). Tolerant-reader rule.
    std::string header_extra;
};

void write_grid_dump(const std::string& path, const GridDump& dump);
GridDump read_grid_dump(const std::string& path);

/// Expected payload bytes per image for a spec (all strides).
std::size_t grid_payload_bytes_per_image(const GridSpec& spec);

}  // namespace bpj
