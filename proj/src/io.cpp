#include "bpj/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace bpj {

using nlohmann::json;

// ---------------------------------------------------------------------------
// GridSpec JSON

json spec_to_json(const GridSpec& spec) {
    json j;
    j["strides"] = spec.strides;
    if (spec.variant != Variant::anchor_free) {
        json anchors = json::array();
        for (const auto& set : spec.anchors) {
            json per_stride = json::array();
            for (const auto& a : set) {
                per_stride.push_back({a.w, a.h});
            }
            anchors.push_back(per_stride);
        }
        j["anchors"] = anchors;
    }
    j["part_count"] = spec.part_count;
    if (!spec.part_labels.empty()) {
        j["part_labels"] = spec.part_labels;
    }
    j["variant"] = variant_name(spec.variant);
    j["image_w"] = spec.image_w;
    j["image_h"] = spec.image_h;
    if (spec.has_contact()) {
        j["contact_slots"] = spec.contact_slots;
    }
    return j;
}

GridSpec spec_from_json(const json& j) {
    GridSpec spec;
    try {
        if (j.contains("strides")) {
            spec.strides = j.at("strides").get<std::vector<int>>();
        }
        spec.variant = variant_from_name(j.value("variant", std::string("anchor_based")));
        spec.part_count = j.at("part_count").get<int>();
        if (j.contains("part_labels")) {
            spec.part_labels = j.at("part_labels").get<std::vector<std::string>>();
        }
        spec.image_w = j.at("image_w").get<int>();
        spec.image_h = j.at("image_h").get<int>();
        if (spec.variant != Variant::anchor_free) {
            if (j.contains("anchors")) {
                spec.anchors.clear();
                for (const auto& set : j.at("anchors")) {
                    std::vector<Anchor> anchors;
                    for (const auto& a : set) {
                        anchors.push_back(Anchor{a.at(0).get<double>(), a.at(1).get<double>()});
                    }
                    spec.anchors.push_back(std::move(anchors));
                }
            } else {
                spec.anchors = GridSpec::default_anchors(spec.strides);
            }
        }
        if (j.contains("contact_slots")) {
            spec.contact_slots = j.at("contact_slots").get<std::vector<int>>();
        } else if (spec.part_count == 1) {
            spec.contact_slots = {0, 0};
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("grid spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

GridSpec read_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open spec file " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("spec file " + path + ": " + e.what());
    }
    return spec_from_json(j);
}

void write_spec(const std::string& path, const GridSpec& spec) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write spec file " + path);
    }
    out << spec_to_json(spec).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Number formatting: fixed notation, at most 6 fractional digits, trailing
// zeros trimmed. Deterministic across platforms for the value ranges the
// pipeline produces (pixel coordinates and probabilities).

std::string format_number(double v) {
    if (v == 0.0) {
        return "0";  // normalizes -0 as well
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    std::string s(buf);
    // trim trailing zeros, then a trailing dot
    auto last = s.find_last_not_of('0');
    if (last != std::string::npos) {
        s.erase(last + 1);
    }
    if (!s.empty() && s.back() == '.') {
        s.pop_back();
    }
    if (s == "-0") {
        s = "0";
    }
    return s;
}

namespace {

void append_json_string(std::string& out, const std::string& s) {
    out += '"';
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += '"';
}

void append_box(std::string& out, const Box& box) {
    out += '[';
    out += format_number(box.x1);
    out += ',';
    out += format_number(box.y1);
    out += ',';
    out += format_number(box.x2);
    out += ',';
    out += format_number(box.y2);
    out += ']';
}

Box box_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 4) {
        throw DataError(where + ": box must be a 4-element array");
    }
    Box box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
    if (!box.valid()) {
        throw DataError(where + ": box corners inverted");
    }
    return box;
}

/// Runs `parse` over every non-empty line, converting parse errors into
/// DataError with file name and line number.
template <typename Fn>
void for_each_line(std::istream& in, const std::string& name, Fn&& parse) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(name + ":" + std::to_string(line_no) + ": malformed JSON: " +
                            e.what());
        }
        try {
            parse(j, line_no);
        } catch (const json::exception& e) {
            throw DataError(name + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError(name + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Scene NDJSON

std::string scene_to_line(const Scene& scene) {
    std::string out;
    out += "{\"image_id\":";
    append_json_string(out, scene.image_id);
    out += ",\"width\":" + std::to_string(scene.width);
    out += ",\"height\":" + std::to_string(scene.height);
    out += ",\"bodies\":[";
    bool first_body = true;
    for (const auto& body : scene.bodies) {
        if (!first_body) out += ',';
        first_body = false;
        out += "{\"body_id\":";
        append_json_string(out, body.body_id);
        out += ",\"box\":";
        append_box(out, body.box);
        out += ",\"parts\":[";
        bool first_part = true;
        for (const auto& part : body.parts) {
            if (!first_part) out += ',';
            first_part = false;
            if (!part) {
                out += "null";
                continue;
            }
            out += "{\"box\":";
            append_box(out, part->box);
            out += ",\"visible\":" + std::to_string(part->visible);
            if (part->contact) {
                out += ",\"contact\":[";
                for (int s = 0; s < 4; ++s) {
                    if (s) out += ',';
                    out += std::to_string((*part->contact)[s]);
                }
                out += ']';
            }
            out += '}';
        }
        out += "]}";
    }
    out += "]}";
    return out;
}

void write_scenes(const std::string& path, const std::vector<Scene>& scenes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write scene file " + path);
    }
    for (const auto& scene : scenes) {
        out << scene_to_line(scene) << '\n';
    }
}

std::vector<Scene> read_scenes_stream(std::istream& in, const std::string& name) {
    std::vector<Scene> scenes;
    for_each_line(in, name, [&](const json& j, std::size_t) {
        Scene scene;
        scene.image_id = j.at("image_id").get<std::string>();
        scene.width = j.at("width").get<int>();
        scene.height = j.at("height").get<int>();
        for (const auto& jb : j.at("bodies")) {
            BodyAnnotation body;
            body.body_id = jb.value("body_id", std::string());
            body.box = box_from_json(jb.at("box"), "body " + body.body_id);
            for (const auto& jp : jb.at("parts")) {
                if (jp.is_null()) {
                    body.parts.push_back(std::nullopt);
                    continue;
                }
                PartAnnotation part;
                part.box = box_from_json(jp.at("box"), "part of body " + body.body_id);
                part.visible = jp.value("visible", 1);
                if (jp.contains("contact") && !jp.at("contact").is_null()) {
                    const auto& jc = jp.at("contact");
                    if (!jc.is_array() || jc.size() != 4) {
                        throw DataError("contact must be a 4-element array");
                    }
                    ContactStates states{};
                    for (int s = 0; s < 4; ++s) {
                        states[s] = jc[s].get<int>();
                    }
                    part.contact = states;
                }
                body.parts.push_back(std::move(part));
            }
            scene.bodies.push_back(std::move(body));
        }
        scenes.push_back(std::move(scene));
    });
    return scenes;
}

std::vector<Scene> read_scenes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open scene file " + path);
    }
    return read_scenes_stream(in, path);
}

// ---------------------------------------------------------------------------
// Detection NDJSON

std::string detection_to_line(const DetectionRecord& record) {
    std::string out;
    out += "{\"image_id\":";
    append_json_string(out, record.image_id);
    out += ",\"bodies\":[";
    bool first_body = true;
    for (const auto& body : record.bodies) {
        if (!first_body) out += ',';
        first_body = false;
        out += "{\"box\":";
        append_box(out, body.box);
        out += ",\"score\":" + format_number(body.score);
        out += ",\"parts\":[";
        bool first_part = true;
        for (const auto& part : body.parts) {
            if (!first_part) out += ',';
            first_part = false;
            if (!part) {
                out += "null";
                continue;
            }
            out += "{\"box\":";
            append_box(out, part->box);
            out += ",\"score\":" + format_number(part->score);
            out += ",\"center\":[" + format_number(part->cx) + ',' + format_number(part->cy) +
                   ']';
            if (part->contact_scores) {
                out += ",\"contact_scores\":[";
                for (int s = 0; s < 4; ++s) {
                    if (s) out += ',';
                    out += format_number((*part->contact_scores)[s]);
                }
                out += ']';
            }
            out += '}';
        }
        out += "]}";
    }
    out += ']';
    if (!record.extra_parts.empty()) {
        out += ",\"extra_parts\":[";
        bool first = true;
        for (const auto& part : record.extra_parts) {
            if (!first) out += ',';
            first = false;
            out += "{\"slot\":" + std::to_string(part.slot);
            out += ",\"box\":";
            append_box(out, part.box);
            out += ",\"score\":" + format_number(part.score);
            out += '}';
        }
        out += ']';
    }
    out += '}';
    return out;
}

void write_detections(const std::string& path, const std::vector<DetectionRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write detection file " + path);
    }
    for (const auto& record : records) {
        out << detection_to_line(record) << '\n';
    }
}

std::vector<DetectionRecord> read_detections_stream(std::istream& in, const std::string& name) {
    std::vector<DetectionRecord> records;
    for_each_line(in, name, [&](const json& j, std::size_t) {
        DetectionRecord record;
        record.image_id = j.at("image_id").get<std::string>();
        for (const auto& jb : j.at("bodies")) {
            AssociatedDetection body;
            body.box = box_from_json(jb.at("box"), "detection body");
            body.score = jb.at("score").get<double>();
            if (body.score < 0.0 || body.score > 1.0) {
                throw DataError("body score " + std::to_string(body.score) + " outside [0,1]");
            }
            for (const auto& jp : jb.at("parts")) {
                if (jp.is_null()) {
                    body.parts.push_back(std::nullopt);
                    continue;
                }
                AssociatedPart part;
                part.box = box_from_json(jp.at("box"), "detection part");
                part.score = jp.at("score").get<double>();
                if (part.score < 0.0 || part.score > 1.0) {
                    throw DataError("part score " + std::to_string(part.score) +
                                    " outside [0,1]");
                }
                if (jp.contains("center")) {
                    part.cx = jp.at("center").at(0).get<double>();
                    part.cy = jp.at("center").at(1).get<double>();
                } else {
                    part.cx = part.box.cx();
                    part.cy = part.box.cy();
                }
                if (jp.contains("contact_scores") && !jp.at("contact_scores").is_null()) {
                    std::array<double, 4> scores{};
                    for (int s = 0; s < 4; ++s) {
                        scores[s] = jp.at("contact_scores").at(s).get<double>();
                    }
                    part.contact_scores = scores;
                }
                body.parts.push_back(std::move(part));
            }
            record.bodies.push_back(std::move(body));
        }
        if (j.contains("extra_parts")) {
            for (const auto& jp : j.at("extra_parts")) {
                UnassociatedPart part;
                part.slot = jp.at("slot").get<int>();
                part.box = box_from_json(jp.at("box"), "extra part");
                part.score = jp.at("score").get<double>();
                record.extra_parts.push_back(std::move(part));
            }
        }
        records.push_back(std::move(record));
    });
    return records;
}

std::vector<DetectionRecord> read_detections(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open detection file " + path);
    }
    return read_detections_stream(in, path);
}

// ---------------------------------------------------------------------------
// Binary grid dump

namespace {

constexpr char kMagic[4] = {'B', 'P', 'J', 'G'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    out += static_cast<char>(v & 0xFF);
    out += static_cast<char>((v >> 8) & 0xFF);
    out += static_cast<char>((v >> 16) & 0xFF);
    out += static_cast<char>((v >> 24) & 0xFF);
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

static_assert(sizeof(float) == 4, "grid dump requires 32-bit IEEE-754 floats");

void append_floats_le(std::string& out, const std::vector<float>& values) {
    if constexpr (std::endian::native == std::endian::little) {
        const auto* bytes = reinterpret_cast<const char*>(values.data());
        out.append(bytes, values.size() * 4);
    } else {
        for (float f : values) {
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32(out, bits);
        }
    }
}

void read_floats_le(const unsigned char* p, std::vector<float>& values) {
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(values.data(), p, values.size() * 4);
    } else {
        for (auto& f : values) {
            const std::uint32_t bits = get_u32(p);
            std::memcpy(&f, &bits, 4);
            p += 4;
        }
    }
}

}  // namespace

std::size_t grid_payload_bytes_per_image(const GridSpec& spec) {
    std::size_t total = 0;
    for (int stride : spec.strides) {
        total += static_cast<std::size_t>(spec.anchors_per_stride()) * spec.channels() *
                 spec.grid_h(stride) * spec.grid_w(stride) * 4;
    }
    return total;
}

void write_grid_dump(const std::string& path, const GridDump& dump) {
    dump.spec.validate();
    if (dump.images.size() != dump.image_ids.size()) {
        throw DataError("grid dump: image_ids / images count mismatch");
    }

    json header;
    if (!dump.header_extra.empty()) {
        header = json::parse(dump.header_extra);
    }
    header["spec"] = spec_to_json(dump.spec);
    header["images"] = dump.image_ids;
    header["kind"] = dump.kind;
    const std::string header_text = header.dump();

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(header_text.size()));
    out += header_text;

    for (std::size_t i = 0; i < dump.images.size(); ++i) {
        const auto& tensors = dump.images[i];
        if (tensors.size() != dump.spec.strides.size()) {
            throw DataError("grid dump: image " + dump.image_ids[i] +
                            " does not cover every stride");
        }
        for (std::size_t si = 0; si < tensors.size(); ++si) {
            const auto& t = tensors[si];
            if (t.stride != dump.spec.strides[si]) {
                throw DataError("grid dump: tensors must be in ascending stride order");
            }
            const std::size_t expected = static_cast<std::size_t>(t.anchors) * t.channels *
                                         t.height * t.width;
            if (t.values.size() != expected) {
                throw DataError("grid dump: tensor size mismatch at stride " +
                                std::to_string(t.stride));
            }
            append_floats_le(out, t.values);
        }
    }

    std::ofstream file(path, std::ios::binary);
    if (!file) {
        throw DataError("cannot write grid dump " + path);
    }
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) {
        throw DataError("short write to grid dump " + path);
    }
}

GridDump read_grid_dump(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw DataError("cannot open grid dump " + path);
    }
    std::string data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());

    if (data.size() < 12 || std::memcmp(data.data(), kMagic, 4) != 0) {
        throw DataError(path + ": not a grid dump (bad magic)");
    }
    const std::uint32_t version = get_u32(bytes + 4);
    if (version != kVersion) {
        throw DataError(path + ": unsupported grid dump version " + std::to_string(version) +
                        " (expected " + std::to_string(kVersion) + ")");
    }
    const std::uint32_t header_len = get_u32(bytes + 8);
    if (data.size() < 12 + static_cast<std::size_t>(header_len)) {
        throw DataError(path + ": truncated header (declared " + std::to_string(header_len) +
                        " bytes, file holds " + std::to_string(data.size() - 12) + ")");
    }

    json header;
    try {
        header = json::parse(data.substr(12, header_len));
    } catch (const json::exception& e) {
        throw DataError(path + ": header JSON: " + e.what());
    }

    GridDump dump;
    try {
        dump.spec = spec_from_json(header.at("spec"));
        dump.image_ids = header.at("images").get<std::vector<std::string>>();
        dump.kind = header.value("kind", std::string("predictions"));
    } catch (const json::exception& e) {
        throw DataError(path + ": header: " + e.what());
    }
    json extra = header;
    extra.erase("spec");
    extra.erase("images");
    extra.erase("kind");
    if (!extra.empty()) {
        dump.header_extra = extra.dump();
    }

    const std::size_t payload_offset = 12 + header_len;
    const std::size_t expected_payload =
        grid_payload_bytes_per_image(dump.spec) * dump.image_ids.size();
    const std::size_t actual_payload = data.size() - payload_offset;
    if (actual_payload != expected_payload) {
        throw DataError(path + ": payload length mismatch: expected " +
                        std::to_string(expected_payload) + " bytes, found " +
                        std::to_string(actual_payload));
    }

    const unsigned char* p = bytes + payload_offset;
    dump.images.reserve(dump.image_ids.size());
    for (std::size_t i = 0; i < dump.image_ids.size(); ++i) {
        std::vector<GridTensor> tensors;
        tensors.reserve(dump.spec.strides.size());
        for (int stride : dump.spec.strides) {
            GridTensor t = GridTensor::zeros(dump.spec, stride);
            read_floats_le(p, t.values);
            p += t.values.size() * 4;
            tensors.push_back(std::move(t));
        }
        dump.images.push_back(std::move(tensors));
    }
    return dump;
}

}  // namespace bpj
