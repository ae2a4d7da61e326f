#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bpj/common.hpp"
#include "bpj/geometry.hpp"
#include "bpj/rng.hpp"

using bpj::Box;

namespace {

/// Independent IoU reference: rasterize both boxes onto a fine sub-pixel
/// grid and count covered cells. Slow but free of any analytic overlap
/// arithmetic shared with the implementation under test.
double raster_iou(const Box& a, const Box& b, int cells_per_unit = 20) {
    const double lo_x = std::min(a.x1, b.x1);
    const double lo_y = std::min(a.y1, b.y1);
    const double hi_x = std::max(a.x2, b.x2);
    const double hi_y = std::max(a.y2, b.y2);
    const double step = 1.0 / cells_per_unit;
    long long in_a = 0, in_b = 0, in_both = 0;
    for (double y = lo_y + step / 2; y < hi_y; y += step) {
        for (double x = lo_x + step / 2; x < hi_x; x += step) {
            const bool pa = x > a.x1 && x < a.x2 && y > a.y1 && y < a.y2;
            const bool pb = x > b.x1 && x < b.x2 && y > b.y1 && y < b.y2;
            in_a += pa;
            in_b += pb;
            in_both += pa && pb;
        }
    }
    const long long uni = in_a + in_b - in_both;
    return uni == 0 ? 0.0 : static_cast<double>(in_both) / static_cast<double>(uni);
}

Box random_box(bpj::Rng& rng, double extent) {
    const double x1 = rng.uniform(0.0, extent);
    const double y1 = rng.uniform(0.0, extent);
    const double w = rng.uniform(1.0, extent / 2);
    const double h = rng.uniform(1.0, extent / 2);
    return Box{x1, y1, x1 + w, y1 + h};
}

}  // namespace

TEST_CASE("iou matches hand-computed overlap") {
    // 4x4 boxes offset by 2 in both axes: intersection 2*2=4, union 16+16-4=28.
    const Box a{0, 0, 4, 4};
    const Box b{2, 2, 6, 6};
    CHECK(bpj::iou(a, b) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
    CHECK(bpj::intersection_area(a, b) == doctest::Approx(4.0));
}

TEST_CASE("iou basic properties") {
    const Box a{0, 0, 4, 4};
    CHECK(bpj::iou(a, a) == doctest::Approx(1.0));
    CHECK(bpj::iou(a, Box{10, 10, 12, 12}) == 0.0);
    // edge-touching boxes share zero area
    CHECK(bpj::iou(a, Box{4, 0, 8, 4}) == 0.0);
}

TEST_CASE("iou agrees with rasterization oracle on random boxes") {
    bpj::Rng rng(2024);
    for (int i = 0; i < 200; ++i) {
        const Box a = random_box(rng, 30.0);
        const Box b = random_box(rng, 30.0);
        const double expected = raster_iou(a, b);
        CHECK(bpj::iou(a, b) == doctest::Approx(expected).epsilon(0.02));
        CHECK(bpj::iou(a, b) == bpj::iou(b, a));  // symmetry
    }
}

TEST_CASE("containment-normalized overlap uses the second box area") {
    // part fully inside body -> 1 regardless of body size
    const Box body{0, 0, 100, 100};
    const Box part{10, 10, 20, 20};
    CHECK(bpj::inner_iou(body, part) == doctest::Approx(1.0));
    // half the part sticks out of the body
    const Box half_out{-5, 10, 5, 20};
    CHECK(bpj::inner_iou(body, half_out) == doctest::Approx(0.5));
    // disjoint -> 0
    CHECK(bpj::inner_iou(body, Box{200, 200, 210, 210}) == 0.0);
    // asymmetric by construction
    CHECK(bpj::inner_iou(part, body) == doctest::Approx(0.01));
}

TEST_CASE("ciou equals iou term structure for identical boxes") {
    const Box a{3, 4, 9, 16};
    CHECK(bpj::ciou(a, a) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("ciou is upper-bounded by iou and symmetric") {
    bpj::Rng rng(99);
    for (int i = 0; i < 200; ++i) {
        const Box a = random_box(rng, 30.0);
        const Box b = random_box(rng, 30.0);
        const double c = bpj::ciou(a, b);
        CHECK(c <= bpj::iou(a, b) + 1e-12);
        CHECK(c >= -1.0 - 1e-12);
        CHECK(c == doctest::Approx(bpj::ciou(b, a)).epsilon(1e-12));
    }
}

TEST_CASE("ciou penalizes center distance among equal-iou pairs") {
    // Same box shapes, zero overlap in both pairs, different center distance.
    const Box a{0, 0, 4, 4};
    const Box near{4, 0, 8, 4};
    const Box far{12, 0, 16, 4};
    CHECK(bpj::iou(a, near) == bpj::iou(a, far));
    CHECK(bpj::ciou(a, near) > bpj::ciou(a, far));
}

TEST_CASE("ciou penalizes aspect mismatch among concentric equal-area boxes") {
    const Box square{-2, -2, 2, 2};
    const Box same{-2, -2, 2, 2};
    const Box stretched{-4, -1, 4, 1};  // same area, 4:1 aspect
    CHECK(bpj::ciou(square, same) > bpj::ciou(square, stretched));
}

TEST_CASE("ciou rejects degenerate boxes") {
    const Box ok{0, 0, 4, 4};
    CHECK_THROWS_AS(bpj::ciou(ok, Box{1, 1, 1, 5}), bpj::DataError);
    CHECK_THROWS_AS(bpj::ciou(Box{1, 1, 5, 1}, ok), bpj::DataError);
}

TEST_CASE("sigmoid and logit are stable inverses") {
    CHECK(bpj::sigmoid(0.0) == doctest::Approx(0.5));
    CHECK(bpj::sigmoid(-40.0) > 0.0);
    CHECK(bpj::sigmoid(30.0) < 1.0);
    CHECK(bpj::sigmoid(40.0) <= 1.0);
    CHECK(std::isfinite(bpj::sigmoid(-700.0)));  // no overflow in exp
    bpj::Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        const double p = rng.uniform(0.001, 0.999);
        CHECK(bpj::sigmoid(bpj::logit(p)) == doctest::Approx(p).epsilon(1e-9));
    }
    // saturated probabilities clamp instead of producing infinities
    CHECK(std::isfinite(bpj::clamped_logit(1.0)));
    CHECK(std::isfinite(bpj::clamped_logit(0.0)));
    CHECK(bpj::sigmoid(bpj::clamped_logit(1.0)) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("rng streams are deterministic and independent") {
    bpj::Rng a(1234);
    bpj::Rng b(1234);
    for (int i = 0; i < 50; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    bpj::Rng s0 = bpj::Rng::derive(42, 0);
    bpj::Rng s1 = bpj::Rng::derive(42, 1);
    bool differ = false;
    for (int i = 0; i < 10; ++i) {
        differ |= s0.next_u64() != s1.next_u64();
    }
    CHECK(differ);
}

TEST_CASE("rng uniform and normal look sane") {
    bpj::Rng rng(555);
    double sum = 0.0, sum2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
    sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.normal();
        sum += g;
        sum2 += g * g;
    }
    CHECK(sum / n == doctest::Approx(0.0).epsilon(1.0).scale(0.05));
    CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.05));
    for (int i = 0; i < 1000; ++i) {
        const int v = rng.uniform_int(3, 7);
        CHECK(v >= 3);
        CHECK(v <= 7);
    }
}
