#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "bpj/common.hpp"
#include "bpj/rng.hpp"
#include "bpj/transforms.hpp"

using bpj::Box;
using bpj::ChannelLayout;
using bpj::ExtendedObject;
using bpj::GridSpec;
using bpj::Offset;
using bpj::Variant;

namespace {

GridSpec make_spec(Variant variant, int k = 1) {
    GridSpec spec;
    spec.variant = variant;
    spec.part_count = k;
    spec.image_w = 256;
    spec.image_h = 256;
    if (variant != Variant::anchor_free) {
        spec.anchors = GridSpec::default_anchors(spec.strides);
    }
    spec.validate();
    return spec;
}

std::vector<float> raw_zeros(const GridSpec& spec) {
    return std::vector<float>(static_cast<std::size_t>(spec.channels()), 0.0f);
}

}  // namespace

TEST_CASE("channel layout covers every channel exactly once") {
    for (auto variant :
         {Variant::anchor_based, Variant::anchor_free, Variant::anchor_based_contact}) {
        const int k = variant == Variant::anchor_based_contact ? 2 : 3;
        const GridSpec spec = make_spec(variant, k);
        const ChannelLayout layout = channel_layout(spec);
        CHECK(layout.total == spec.channels());
        CHECK(static_cast<int>(layout.names.size()) == layout.total);
        // expected totals: 3k+6 / 3k+5 / 3k+14
        const int expected = variant == Variant::anchor_based     ? 3 * k + 6
                             : variant == Variant::anchor_free    ? 3 * k + 5
                                                                  : 3 * k + 14;
        CHECK(layout.total == expected);
        std::vector<int> seen(layout.total, 0);
        auto mark = [&](int ch) {
            REQUIRE(ch >= 0);
            REQUIRE(ch < layout.total);
            ++seen[ch];
        };
        if (layout.obj >= 0) mark(layout.obj);
        for (int i = 0; i < 4; ++i) mark(layout.box + i);
        for (int c = 0; c < k + 1; ++c) mark(layout.cls_channel(c));
        for (int j = 0; j < k; ++j) {
            mark(layout.offset_x(j));
            mark(layout.offset_y(j));
        }
        if (layout.contact >= 0) {
            for (int g = 0; g < 2; ++g) {
                for (int s = 0; s < 4; ++s) mark(layout.contact_channel(g, s));
            }
        }
        for (int v : seen) CHECK(v == 1);
    }
}

TEST_CASE("all-zero raw vector decodes to the anchor fixed point") {
    // anchor (64,64) at s=8 is the default 8x anchor? default anchors at s=8
    // are {8,16,32}; use an explicit 64x64 anchor to match the documented case.
    GridSpec spec = make_spec(Variant::anchor_based, 1);
    spec.anchors = {{{64, 64}}, {{64, 64}}, {{64, 64}}, {{64, 64}}};
    spec.validate();
    const ChannelLayout layout = channel_layout(spec);
    const auto raw = raw_zeros(spec);
    const ExtendedObject obj = decode_cell(raw.data(), spec, layout, 8, 0, 0, 0);
    CHECK(obj.box.cx() == doctest::Approx(0.5));
    CHECK(obj.box.cy() == doctest::Approx(0.5));
    CHECK(obj.box.width() == doctest::Approx(8.0));   // 64/8 grid units
    CHECK(obj.box.height() == doctest::Approx(8.0));
    CHECK(obj.objectness == doctest::Approx(0.5));
    for (double c : obj.class_scores) CHECK(c == doctest::Approx(0.5));
    for (const Offset& d : obj.offsets) {
        CHECK(d.set);
        CHECK(d.x == doctest::Approx(0.0));
        CHECK(d.y == doctest::Approx(0.0));
    }
}

TEST_CASE("cell origin shifts the decoded center") {
    const GridSpec spec = make_spec(Variant::anchor_based, 1);
    const ChannelLayout layout = channel_layout(spec);
    const auto raw = raw_zeros(spec);
    const ExtendedObject obj = decode_cell(raw.data(), spec, layout, 16, 1, 3, 5);
    CHECK(obj.box.cx() == doctest::Approx(3.5));
    CHECK(obj.box.cy() == doctest::Approx(5.5));
}

TEST_CASE("offset transform matches the closed-form value") {
    // raw 2.0 with a 64px anchor at stride 8: (4*sigmoid(2)-2)*64/8 = 12.1855
    GridSpec spec = make_spec(Variant::anchor_based, 1);
    spec.anchors = {{{64, 64}}, {{64, 64}}, {{64, 64}}, {{64, 64}}};
    spec.validate();
    const ChannelLayout layout = channel_layout(spec);
    auto raw = raw_zeros(spec);
    raw[layout.offset_x(0)] = 2.0f;
    const ExtendedObject obj = decode_cell(raw.data(), spec, layout, 8, 0, 0, 0);
    CHECK(obj.offsets[0].x == doctest::Approx(12.1855).epsilon(1e-4));
    CHECK(obj.offsets[0].y == doctest::Approx(0.0));
}

TEST_CASE("box and offset channels saturate at their documented bounds") {
    GridSpec spec = make_spec(Variant::anchor_based, 2);
    spec.anchors = GridSpec::default_anchors(spec.strides);
    spec.validate();
    const ChannelLayout layout = channel_layout(spec);
    auto raw = raw_zeros(spec);
    raw[layout.box + 2] = 20.0f;   // w
    raw[layout.box + 3] = -20.0f;  // h
    raw[layout.offset_x(0)] = 20.0f;
    raw[layout.offset_y(1)] = -20.0f;
    const int stride = 8;
    const int anchor = 2;  // (32,32) at s=8
    const double scale = 32.0 / stride;
    const ExtendedObject obj = decode_cell(raw.data(), spec, layout, stride, anchor, 0, 0);
    CHECK(obj.box.width() == doctest::Approx(4.0 * scale).epsilon(1e-3));
    CHECK(obj.box.height() == doctest::Approx(0.0).scale(1).epsilon(1e-3));
    CHECK(obj.offsets[0].x == doctest::Approx(2.0 * scale).epsilon(1e-3));
    CHECK(obj.offsets[1].y == doctest::Approx(-2.0 * scale).epsilon(1e-3));
    CHECK(bpj::offset_bound(spec, stride, anchor, true) == doctest::Approx(2.0 * scale));
}

TEST_CASE("non-finite raw values are rejected with cell identification") {
    const GridSpec spec = make_spec(Variant::anchor_based, 1);
    const ChannelLayout layout = channel_layout(spec);
    auto raw = raw_zeros(spec);
    raw[2] = std::numeric_limits<float>::quiet_NaN();
    try {
        decode_cell(raw.data(), spec, layout, 8, 1, 4, 7);
        FAIL("expected DataError");
    } catch (const bpj::DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("stride 8") != std::string::npos);
        CHECK(msg.find("anchor 1") != std::string::npos);
        CHECK(msg.find("(4,7)") != std::string::npos);
    }
}

TEST_CASE("anchor-free side distances rebuild the box around the location") {
    const GridSpec spec = make_spec(Variant::anchor_free, 1);
    const ChannelLayout layout = channel_layout(spec);
    auto raw = raw_zeros(spec);
    raw[layout.box + 0] = 1.0f;  // l
    raw[layout.box + 1] = 1.0f;  // t
    raw[layout.box + 2] = 1.0f;  // r
    raw[layout.box + 3] = 1.0f;  // b
    const ExtendedObject obj = decode_cell_free(raw.data(), spec, layout, 8, 5.0, 5.0);
    CHECK(obj.box.x1 == doctest::Approx(4.0));
    CHECK(obj.box.y1 == doctest::Approx(4.0));
    CHECK(obj.box.x2 == doctest::Approx(6.0));
    CHECK(obj.box.y2 == doctest::Approx(6.0));
    CHECK_FALSE(obj.degenerate);
}

TEST_CASE("anchor-free zero or negative sides flag the object degenerate") {
    const GridSpec spec = make_spec(Variant::anchor_free, 1);
    const ChannelLayout layout = channel_layout(spec);
    auto raw = raw_zeros(spec);
    const ExtendedObject zero = decode_cell_free(raw.data(), spec, layout, 8, 5.0, 5.0);
    CHECK(zero.degenerate);
    CHECK(zero.box.area() == doctest::Approx(0.0));
    raw[layout.box + 0] = -3.0f;
    raw[layout.box + 1] = 1.0f;
    raw[layout.box + 2] = 1.0f;
    raw[layout.box + 3] = 1.0f;
    const ExtendedObject neg = decode_cell_free(raw.data(), spec, layout, 8, 5.0, 5.0);
    CHECK(neg.degenerate);
    CHECK(neg.box.x1 == doctest::Approx(5.0));  // clamped side
}

TEST_CASE("anchor-free offsets use a unit-scale bounded transform") {
    const GridSpec spec = make_spec(Variant::anchor_free, 2);
    const ChannelLayout layout = channel_layout(spec);
    auto raw = raw_zeros(spec);
    raw[layout.offset_x(1)] = 20.0f;
    const ExtendedObject obj = decode_cell_free(raw.data(), spec, layout, 8, 0.5, 0.5);
    CHECK(obj.offsets[0].x == doctest::Approx(0.0));
    CHECK(obj.offsets[1].x == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(bpj::offset_bound(spec, 8, 0, true) == doctest::Approx(2.0));
}

TEST_CASE("encode of the fixed-point object yields all-zero raw channels") {
    GridSpec spec = make_spec(Variant::anchor_based, 1);
    spec.anchors = {{{64, 64}}, {{64, 64}}, {{64, 64}}, {{64, 64}}};
    spec.validate();
    const ChannelLayout layout = channel_layout(spec);
    ExtendedObject obj;
    obj.box = Box::from_center(0.5, 0.5, 8.0, 8.0);  // B/s at s=8
    obj.objectness = 0.5;
    obj.class_scores = {0.5, 0.5};
    obj.offsets = {Offset{0.0, 0.0, true}};
    const auto raw = encode_targets(obj, spec, layout, 8, 0);
    for (int ch = 0; ch < layout.total; ++ch) {
        CHECK(raw[ch] == doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("decode(encode) round-trips random in-range objects") {
    GridSpec spec = make_spec(Variant::anchor_based_contact, 2);
    const ChannelLayout layout = channel_layout(spec);
    bpj::Rng rng(31337);
    double max_err = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int si = rng.uniform_int(0, 3);
        const int stride = spec.strides[si];
        const int anchor = rng.uniform_int(0, 2);
        const auto& a = spec.anchors[si][anchor];
        ExtendedObject obj;
        const double cx = rng.uniform(-0.5, 1.5);
        const double cy = rng.uniform(-0.5, 1.5);
        const double w = rng.uniform(0.05, 3.95) * a.w / stride;
        const double h = rng.uniform(0.05, 3.95) * a.h / stride;
        obj.box = Box::from_center(cx, cy, w, h);
        obj.objectness = rng.uniform(0.01, 0.99);
        obj.class_scores = {rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99),
                            rng.uniform(0.01, 0.99)};
        obj.offsets = {Offset{rng.uniform(-1.99, 1.99) * a.w / stride,
                              rng.uniform(-1.99, 1.99) * a.h / stride, true},
                       Offset{rng.uniform(-1.99, 1.99) * a.w / stride,
                              rng.uniform(-1.99, 1.99) * a.h / stride, true}};
        std::array<std::array<double, 4>, 2> contact{};
        for (auto& g : contact) {
            for (auto& s : g) s = rng.uniform(0.01, 0.99);
        }
        obj.contact = contact;

        const auto raw = encode_targets(obj, spec, layout, stride, anchor);
        std::vector<float> raw_f(raw.begin(), raw.end());
        ExtendedObject back = decode_cell(raw_f.data(), spec, layout, stride, anchor, 0, 0);

        auto track = [&](double a_, double b_) { max_err = std::max(max_err, std::abs(a_ - b_)); };
        track(back.box.cx(), cx);
        track(back.box.cy(), cy);
        track(back.box.width(), w);
        track(back.box.height(), h);
        track(back.objectness, obj.objectness);
        for (int c = 0; c < 3; ++c) track(back.class_scores[c], obj.class_scores[c]);
        for (int j = 0; j < 2; ++j) {
            track(back.offsets[j].x, obj.offsets[j].x);
            track(back.offsets[j].y, obj.offsets[j].y);
        }
        for (int g = 0; g < 2; ++g) {
            for (int s = 0; s < 4; ++s) track((*back.contact)[g][s], (*obj.contact)[g][s]);
        }
    }
    CHECK(max_err < 1e-5);
}

TEST_CASE("anchor-free encode/decode round-trip") {
    GridSpec spec = make_spec(Variant::anchor_free, 2);
    const ChannelLayout layout = channel_layout(spec);
    bpj::Rng rng(4242);
    double max_err = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const double px = rng.uniform(1.0, 30.0);
        const double py = rng.uniform(1.0, 30.0);
        ExtendedObject obj;
        const double l = rng.uniform(0.01, 5.0), t = rng.uniform(0.01, 5.0);
        const double r = rng.uniform(0.01, 5.0), b = rng.uniform(0.01, 5.0);
        obj.box = Box{px - l, py - t, px + r, py + b};
        obj.class_scores = {rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99),
                            rng.uniform(0.01, 0.99)};
        obj.offsets = {Offset{rng.uniform(-1.99, 1.99), rng.uniform(-1.99, 1.99), true},
                       Offset{rng.uniform(-1.99, 1.99), rng.uniform(-1.99, 1.99), true}};
        const auto raw = encode_targets_free(obj, spec, layout, px, py);
        std::vector<float> raw_f(raw.begin(), raw.end());
        const ExtendedObject back = decode_cell_free(raw_f.data(), spec, layout, 8, px, py);
        auto track = [&](double a_, double b_) { max_err = std::max(max_err, std::abs(a_ - b_)); };
        track(back.box.x1, obj.box.x1);
        track(back.box.y1, obj.box.y1);
        track(back.box.x2, obj.box.x2);
        track(back.box.y2, obj.box.y2);
        for (int j = 0; j < 2; ++j) {
            track(back.offsets[j].x, obj.offsets[j].x);
            track(back.offsets[j].y, obj.offsets[j].y);
        }
    }
    CHECK(max_err < 1e-5);
}

TEST_CASE("encode rejects out-of-range fields naming the offender") {
    GridSpec spec = make_spec(Variant::anchor_based, 1);
    spec.anchors = {{{64, 64}}, {{64, 64}}, {{64, 64}}, {{64, 64}}};
    spec.validate();
    const ChannelLayout layout = channel_layout(spec);
    const double scale = 64.0 / 8;  // B/s at stride 8

    ExtendedObject ok;
    ok.box = Box::from_center(0.5, 0.5, scale, scale);
    ok.objectness = 1.0;
    ok.class_scores = {1.0, 0.0};
    ok.offsets = {Offset{0.0, 0.0, true}};
    CHECK_NOTHROW(encode_targets(ok, spec, layout, 8, 0));

    SUBCASE("width at exactly 4B/s") {
        ExtendedObject bad = ok;
        bad.box = Box::from_center(0.5, 0.5, 4.0 * scale, scale);
        try {
            encode_targets(bad, spec, layout, 8, 0);
            FAIL("expected DataError");
        } catch (const bpj::DataError& e) {
            CHECK(std::string(e.what()).find("width") != std::string::npos);
        }
    }
    SUBCASE("offset at exactly 2B/s") {
        ExtendedObject bad = ok;
        bad.offsets[0] = Offset{2.0 * scale, 0.0, true};
        try {
            encode_targets(bad, spec, layout, 8, 0);
            FAIL("expected DataError");
        } catch (const bpj::DataError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("offset") != std::string::npos);
            CHECK(msg.find("slot 0") != std::string::npos);
        }
    }
    SUBCASE("center outside the responsible range") {
        ExtendedObject bad = ok;
        bad.box = Box::from_center(1.51, 0.5, scale, scale);
        CHECK_THROWS_AS(encode_targets(bad, spec, layout, 8, 0), bpj::DataError);
        // the closed boundary itself is accepted (neighbour-cell targets land
        // exactly on -0.5 / 1.5)
        bad.box = Box::from_center(-0.5, 1.5, scale, scale);
        CHECK_NOTHROW(encode_targets(bad, spec, layout, 8, 0));
    }
}

TEST_CASE("saturated probabilities survive the encode clamp") {
    GridSpec spec = make_spec(Variant::anchor_based, 1);
    const ChannelLayout layout = channel_layout(spec);
    ExtendedObject obj;
    obj.box = Box::from_center(0.5, 0.5, 1.0, 1.0);
    obj.objectness = 1.0;
    obj.class_scores = {1.0, 0.0};
    obj.offsets = {Offset{0.0, 0.0, true}};
    const auto raw = encode_targets(obj, spec, layout, 8, 0);
    CHECK(std::isfinite(raw[layout.obj]));
    std::vector<float> raw_f(raw.begin(), raw.end());
    const ExtendedObject back = decode_cell(raw_f.data(), spec, layout, 8, 0, 0, 0);
    CHECK(back.objectness == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(back.class_scores[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(back.class_scores[1] == doctest::Approx(0.0).scale(1).epsilon(1e-5));
}

TEST_CASE("unset offsets encode as raw zero") {
    GridSpec spec = make_spec(Variant::anchor_based, 2);
    const ChannelLayout layout = channel_layout(spec);
    ExtendedObject obj;
    obj.box = Box::from_center(0.5, 0.5, 1.0, 1.0);
    obj.objectness = 1.0;
    obj.class_scores = {1.0, 0.0, 0.0};
    obj.offsets = {Offset{0.0, 0.0, false}, Offset{1.5, -1.0, true}};
    const auto raw = encode_targets(obj, spec, layout, 8, 0);
    CHECK(raw[layout.offset_x(0)] == doctest::Approx(0.0));
    CHECK(raw[layout.offset_y(0)] == doctest::Approx(0.0));
    CHECK(raw[layout.offset_x(1)] != 0.0);
}
