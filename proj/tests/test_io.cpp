#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bpj/io.hpp"
#include "bpj/rng.hpp"

using bpj::Box;
using bpj::GridSpec;
using bpj::Scene;
using bpj::Variant;

namespace {

std::filesystem::path tmp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

GridSpec small_spec(Variant variant = Variant::anchor_based, int k = 1) {
    GridSpec spec;
    spec.variant = variant;
    spec.part_count = k;
    spec.image_w = 64;
    spec.image_h = 64;
    if (variant != Variant::anchor_free) {
        spec.anchors = GridSpec::default_anchors(spec.strides);
    }
    spec.validate();
    return spec;
}

}  // namespace

TEST_CASE("number formatting trims to at most six fractional digits") {
    CHECK(bpj::format_number(0.0) == "0");
    CHECK(bpj::format_number(-0.0) == "0");
    CHECK(bpj::format_number(1.0) == "1");
    CHECK(bpj::format_number(1.5) == "1.5");
    CHECK(bpj::format_number(-3.25) == "-3.25");
    CHECK(bpj::format_number(0.123456789) == "0.123457");
    CHECK(bpj::format_number(100.000001) == "100.000001");
    CHECK(bpj::format_number(0.1) == "0.1");
    CHECK(bpj::format_number(-0.0000001) == "0");  // rounds to -0.000000
}

TEST_CASE("scene ndjson round-trips including null slots and contact") {
    Scene scene;
    scene.image_id = "img_000";
    scene.width = 64;
    scene.height = 64;
    bpj::BodyAnnotation body;
    body.body_id = "b0";
    body.box = Box{4, 4, 40, 60};
    bpj::PartAnnotation head;
    head.box = Box{14, 4, 30, 20};
    head.visible = 1;
    body.parts.push_back(head);
    body.parts.push_back(std::nullopt);
    scene.bodies.push_back(body);

    bpj::BodyAnnotation contact_body;
    contact_body.body_id = "b1";
    contact_body.box = Box{2, 2, 20, 30.5};
    bpj::PartAnnotation hand;
    hand.box = Box{3, 3, 8, 8};
    hand.visible = 1;
    hand.contact = bpj::ContactStates{0, 1, 2, 0};
    contact_body.parts.push_back(hand);
    contact_body.parts.push_back(std::nullopt);
    scene.bodies.push_back(contact_body);

    const std::string line = bpj::scene_to_line(scene);
    CHECK(line.find('\n') == std::string::npos);
    // parses as strict JSON
    CHECK_NOTHROW(nlohmann::json::parse(line));

    std::istringstream in(line + "\n\n" + line + "\n");
    const auto back = bpj::read_scenes_stream(in, "mem");
    REQUIRE(back.size() == 2);  // blank line skipped
    const Scene& s = back[0];
    CHECK(s.image_id == "img_000");
    REQUIRE(s.bodies.size() == 2);
    CHECK(s.bodies[0].body_id == "b0");
    CHECK(s.bodies[0].box == Box{4, 4, 40, 60});
    REQUIRE(s.bodies[0].parts.size() == 2);
    CHECK(s.bodies[0].parts[0].has_value());
    CHECK_FALSE(s.bodies[0].parts[1].has_value());
    CHECK(s.bodies[1].box.y2 == doctest::Approx(30.5));
    REQUIRE(s.bodies[1].parts[0]->contact.has_value());
    CHECK((*s.bodies[1].parts[0]->contact)[2] == 2);

    // byte-stable: re-serializing the parsed scene reproduces the line
    CHECK(bpj::scene_to_line(s) == line);
}

TEST_CASE("scene reader reports the file name and line number on errors") {
    std::istringstream in("{\"image_id\":\"a\",\"width\":64,\"height\":64,\"bodies\":[]}\n"
                          "{not json}\n");
    try {
        bpj::read_scenes_stream(in, "scenes.ndjson");
        FAIL("expected DataError");
    } catch (const bpj::DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("scenes.ndjson:2") != std::string::npos);
    }

    std::istringstream missing("{\"image_id\":\"a\",\"width\":64}\n");
    try {
        bpj::read_scenes_stream(missing, "x.ndjson");
        FAIL("expected DataError");
    } catch (const bpj::DataError& e) {
        CHECK(std::string(e.what()).find("x.ndjson:1") != std::string::npos);
    }
}

TEST_CASE("scene reader tolerates unknown keys") {
    std::istringstream in(
        "{\"image_id\":\"a\",\"width\":64,\"height\":64,\"bodies\":[],\"note\":\"xyz\"}\n");
    const auto scenes = bpj::read_scenes_stream(in, "mem");
    CHECK(scenes.size() == 1);
}

TEST_CASE("detection ndjson round-trips with extra parts and contact scores") {
    bpj::DetectionRecord record;
    record.image_id = "img_7";
    bpj::AssociatedDetection body;
    body.box = Box{10, 10, 50, 90};
    body.score = 0.875;
    bpj::AssociatedPart part;
    part.box = Box{20, 10, 40, 30};
    part.score = 0.75;
    part.cx = 30.125;
    part.cy = 20.5;
    part.contact_scores = std::array<double, 4>{0.9, 0.1, 0.5, 0.5};
    body.parts.push_back(part);
    body.parts.push_back(std::nullopt);
    record.bodies.push_back(body);
    record.extra_parts.push_back(bpj::UnassociatedPart{1, Box{1, 1, 5, 5}, 0.25});

    const std::string line = bpj::detection_to_line(record);
    CHECK_NOTHROW(nlohmann::json::parse(line));
    std::istringstream in(line + "\n");
    const auto back = bpj::read_detections_stream(in, "mem");
    REQUIRE(back.size() == 1);
    const auto& r = back[0];
    CHECK(r.image_id == "img_7");
    REQUIRE(r.bodies.size() == 1);
    CHECK(r.bodies[0].score == doctest::Approx(0.875));
    REQUIRE(r.bodies[0].parts.size() == 2);
    CHECK(r.bodies[0].parts[0]->cx == doctest::Approx(30.125));
    CHECK((*r.bodies[0].parts[0]->contact_scores)[0] == doctest::Approx(0.9));
    CHECK_FALSE(r.bodies[0].parts[1].has_value());
    REQUIRE(r.extra_parts.size() == 1);
    CHECK(r.extra_parts[0].slot == 1);
    CHECK(r.extra_parts[0].score == doctest::Approx(0.25));
    CHECK(bpj::detection_to_line(r) == line);
}

TEST_CASE("detection records without extra parts omit the key") {
    bpj::DetectionRecord record;
    record.image_id = "a";
    const std::string line = bpj::detection_to_line(record);
    CHECK(line.find("extra_parts") == std::string::npos);
}

TEST_CASE("detection reader rejects out-of-range scores") {
    std::istringstream in(
        "{\"image_id\":\"a\",\"bodies\":[{\"box\":[0,0,1,1],\"score\":1.5,\"parts\":[]}]}\n");
    CHECK_THROWS_AS(bpj::read_detections_stream(in, "d.ndjson"), bpj::DataError);
}

TEST_CASE("grid spec json round-trips for every variant") {
    for (auto variant :
         {Variant::anchor_based, Variant::anchor_free, Variant::anchor_based_contact}) {
        const int k = variant == Variant::anchor_based_contact ? 2 : 1;
        GridSpec spec = small_spec(variant, k);
        spec.part_labels = k == 1 ? std::vector<std::string>{"head"}
                                  : std::vector<std::string>{"left_hand", "right_hand"};
        const auto j = bpj::spec_to_json(spec);
        const GridSpec back = bpj::spec_from_json(j);
        CHECK(back.variant == spec.variant);
        CHECK(back.part_count == spec.part_count);
        CHECK(back.strides == spec.strides);
        CHECK(back.part_labels == spec.part_labels);
        CHECK(back.image_w == spec.image_w);
        if (variant != Variant::anchor_free) {
            CHECK(back.anchors == spec.anchors);
            CHECK_FALSE(j.contains("anchors") == false);
        } else {
            CHECK_FALSE(j.contains("anchors"));
        }
        if (variant == Variant::anchor_based_contact) {
            CHECK(back.contact_slots == spec.contact_slots);
        }
    }
}

TEST_CASE("grid dump round-trips bytes exactly including NaN masks") {
    const GridSpec spec = small_spec(Variant::anchor_based, 1);
    bpj::GridDump dump;
    dump.spec = spec;
    dump.kind = "targets";
    dump.image_ids = {"img_a", "img_b"};
    bpj::Rng rng(7);
    for (int i = 0; i < 2; ++i) {
        std::vector<bpj::GridTensor> tensors;
        for (int stride : spec.strides) {
            auto t = bpj::GridTensor::zeros(spec, stride);
            for (auto& v : t.values) {
                v = static_cast<float>(rng.uniform(-3.0, 3.0));
            }
            t.values[3] = std::numeric_limits<float>::quiet_NaN();
            tensors.push_back(std::move(t));
        }
        dump.images.push_back(std::move(tensors));
    }

    const auto path = tmp_path("bpj_test_dump.bin");
    bpj::write_grid_dump(path.string(), dump);
    const bpj::GridDump back = bpj::read_grid_dump(path.string());
    CHECK(back.kind == "targets");
    CHECK(back.image_ids == dump.image_ids);
    REQUIRE(back.images.size() == 2);
    for (int i = 0; i < 2; ++i) {
        for (std::size_t si = 0; si < spec.strides.size(); ++si) {
            const auto& a = dump.images[i][si].values;
            const auto& b = back.images[i][si].values;
            REQUIRE(a.size() == b.size());
            // bit-exact comparison so NaN payloads survive
            CHECK(std::memcmp(a.data(), b.data(), a.size() * 4) == 0);
        }
    }
    CHECK(std::isnan(back.images[0][0].values[3]));

    // writing the parsed dump again produces identical bytes
    const auto path2 = tmp_path("bpj_test_dump2.bin");
    bpj::write_grid_dump(path2.string(), back);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string d1((std::istreambuf_iterator<char>(f1)), {});
    const std::string d2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(d1 == d2);
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("grid dump payload size matches the documented formula") {
    // k=1 anchor_based at 64x64: 9 channels, 3 anchors, 64+16+4+1 cells
    const GridSpec spec = small_spec(Variant::anchor_based, 1);
    CHECK(bpj::grid_payload_bytes_per_image(spec) == 9180);
    CHECK(spec.channels() == 9);
}

TEST_CASE("grid dump header errors are specific") {
    const auto path = tmp_path("bpj_bad_dump.bin");

    SUBCASE("bad magic") {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE" << std::string(20, '\0');
        out.close();
        try {
            bpj::read_grid_dump(path.string());
            FAIL("expected DataError");
        } catch (const bpj::DataError& e) {
            CHECK(std::string(e.what()).find("magic") != std::string::npos);
        }
    }

    SUBCASE("unsupported version") {
        std::string data = "BPJG";
        data += std::string("\x02\x00\x00\x00", 4);  // version 2
        data += std::string("\x02\x00\x00\x00", 4);  // header length 2
        data += "{}";
        std::ofstream out(path, std::ios::binary);
        out << data;
        out.close();
        try {
            bpj::read_grid_dump(path.string());
            FAIL("expected DataError");
        } catch (const bpj::DataError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("version 2") != std::string::npos);
            CHECK(msg.find("expected 1") != std::string::npos);
        }
    }

    SUBCASE("payload length mismatch names expected and actual") {
        const GridSpec spec = small_spec(Variant::anchor_based, 1);
        bpj::GridDump dump;
        dump.spec = spec;
        dump.image_ids = {"only"};
        std::vector<bpj::GridTensor> tensors;
        for (int stride : spec.strides) {
            tensors.push_back(bpj::GridTensor::zeros(spec, stride));
        }
        dump.images.push_back(std::move(tensors));
        bpj::write_grid_dump(path.string(), dump);
        // append junk
        std::ofstream app(path, std::ios::binary | std::ios::app);
        app << "xx";
        app.close();
        try {
            bpj::read_grid_dump(path.string());
            FAIL("expected DataError");
        } catch (const bpj::DataError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("9180") != std::string::npos);
            CHECK(msg.find("9182") != std::string::npos);
        }
    }

    std::filesystem::remove(path);
}

TEST_CASE("grid dump preserves unknown header keys") {
    const GridSpec spec = small_spec(Variant::anchor_based, 1);
    bpj::GridDump dump;
    dump.spec = spec;
    dump.image_ids = {"x"};
    dump.header_extra = "{\"producer\":\"external-tool\",\"epoch\":12}";
    std::vector<bpj::GridTensor> tensors;
    for (int stride : spec.strides) {
        tensors.push_back(bpj::GridTensor::zeros(spec, stride));
    }
    dump.images.push_back(std::move(tensors));

    const auto path = tmp_path("bpj_extra_dump.bin");
    bpj::write_grid_dump(path.string(), dump);
    const bpj::GridDump back = bpj::read_grid_dump(path.string());
    REQUIRE_FALSE(back.header_extra.empty());
    const auto extra = nlohmann::json::parse(back.header_extra);
    CHECK(extra.at("producer") == "external-tool");
    CHECK(extra.at("epoch") == 12);
    std::filesystem::remove(path);
}

TEST_CASE("spec files read and write through the filesystem") {
    const GridSpec spec = small_spec(Variant::anchor_based_contact, 2);
    const auto path = tmp_path("bpj_spec.json");
    bpj::write_spec(path.string(), spec);
    const GridSpec back = bpj::read_spec(path.string());
    CHECK(back.variant == spec.variant);
    CHECK(back.anchors == spec.anchors);
    CHECK_THROWS_AS(bpj::read_spec("/nonexistent/path.json"), bpj::DataError);
    std::filesystem::remove(path);
}
