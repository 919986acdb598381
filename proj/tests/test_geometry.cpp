#include <doctest.h>

#include <cmath>

#include "gradnest/geometry.hpp"
#include "test_util.hpp"

using namespace gradnest;
using namespace gradnest::geom;
using testutil::l_shape;
using testutil::make_polygon;
using testutil::rect;
using testutil::unit_square;

TEST_CASE("polygon validation") {
    CHECK_THROWS_AS(validate_polygon(make_polygon({{0, 0}, {1, 0}})), GeometryError);
    // clockwise
    CHECK_THROWS_AS(validate_polygon(make_polygon({{0, 0}, {0, 1}, {1, 1}, {1, 0}})), GeometryError);
    // coincident neighbours
    CHECK_THROWS_AS(validate_polygon(make_polygon({{0, 0}, {0, 0}, {1, 0}, {1, 1}})), GeometryError);
    // bow tie
    CHECK_THROWS_AS(validate_polygon(make_polygon({{0, 0}, {1, 1}, {1, 0}, {0, 1}})), GeometryError);
    CHECK_NOTHROW(validate_polygon(unit_square()));
}

TEST_CASE("resample_contour on the unit square") {
    const Polygon sq = unit_square();

    auto four = resample_contour(sq, 4);
    REQUIRE(four.size() == 4);
    CHECK(four[0] == Vec2{0, 0});
    CHECK(four[1] == Vec2{1, 0});
    CHECK(four[2] == Vec2{1, 1});
    CHECK(four[3] == Vec2{0, 1});

    auto eight = resample_contour(sq, 8);
    REQUIRE(eight.size() == 8);
    CHECK(eight[1].x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(eight[1].y == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(eight[3].x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(eight[3].y == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("resample_contour stays on the boundary") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const Polygon poly = trial % 2 == 0 ? testutil::random_convex(rng, 50.0)
                                            : testutil::random_star(rng, 50.0);
        const auto pts = resample_contour(poly, 256);
        REQUIRE(pts.size() == 256);
        for (const Vec2& p : pts) CHECK(testutil::on_boundary(poly, p, 1e-9));
    }
}

TEST_CASE("resample_contour rejects bad input") {
    CHECK_THROWS_AS(resample_contour(unit_square(), 2), GeometryError);
}

TEST_CASE("convex_decompose keeps convex input as a single piece") {
    const Polygon hex = make_polygon({{2, 0}, {4, 1}, {4, 3}, {2, 4}, {0, 3}, {0, 1}});
    const auto pieces = convex_decompose(hex);
    REQUIRE(pieces.size() == 1);
    CHECK(pieces[0].vertices == hex.vertices);

    const Polygon tri = make_polygon({{0, 0}, {3, 0}, {1, 2}});
    const auto tp = convex_decompose(tri);
    REQUIRE(tp.size() == 1);
    CHECK(tp[0].vertices == tri.vertices);
}

TEST_CASE("convex_decompose of the L shape") {
    const Polygon l = l_shape(7);
    const auto pieces = convex_decompose(l);
    CHECK(pieces.size() >= 2);
    double total = 0.0;
    for (const auto& p : pieces) {
        CHECK(is_convex(p.vertices));
        CHECK(p.parent == 7);
        total += signed_area(p.vertices);
    }
    CHECK(total == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("convex_decompose area and convexity on random stars") {
    Rng rng(97);
    for (int trial = 0; trial < 30; ++trial) {
        const Polygon poly = testutil::random_star(rng, 120.0);
        const double want = signed_area(poly.vertices);
        const auto pieces = convex_decompose(poly);
        double got = 0.0;
        for (const auto& p : pieces) {
            CHECK(is_convex(p.vertices));
            got += signed_area(p.vertices);
        }
        CHECK(got == doctest::Approx(want).epsilon(1e-6));
    }
}

TEST_CASE("distance examples") {
    const Polygon a = unit_square(0);
    const Polygon b = unit_square(1);
    // centred at (0,0) and (3,0): squares [-.5,.5] and [2.5,3.5]
    CHECK(distance(a, {-0.5, -0.5}, b, {2.5, -0.5}) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(distance(a, {0, 0}, b, {0.5, 0.5}) == 0.0);
}

TEST_CASE("distance matches brute force on random disjoint pairs") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const Polygon a = trial % 2 == 0 ? testutil::random_convex(rng, 40.0, 0)
                                         : testutil::random_star(rng, 40.0, 0);
        const Polygon b = trial % 3 == 0 ? testutil::random_star(rng, 30.0, 1)
                                         : testutil::random_convex(rng, 30.0, 1);
        // separate along x so the pair is guaranteed disjoint
        const Placement pa{0.0, 0.0};
        const Placement pb{80.0 + rng.uniform(0.0, 40.0), rng.uniform(-30.0, 30.0)};
        const double got = distance(a, pa, b, pb);
        const double want = testutil::brute_force_distance(a, pa.vec(), b, pb.vec());
        CHECK(got == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("distance is exactly symmetric") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const Polygon a = testutil::random_star(rng, 25.0, 0);
        const Polygon b = testutil::random_convex(rng, 25.0, 1);
        const Placement pa{rng.uniform(-50, 50), rng.uniform(-50, 50)};
        const Placement pb{rng.uniform(-50, 50), rng.uniform(-50, 50)};
        CHECK(distance(a, pa, b, pb) == distance(b, pb, a, pa));
    }
}

TEST_CASE("distance and overlap are translation equivariant") {
    Rng rng(13);
    for (int trial = 0; trial < 25; ++trial) {
        const Polygon a = testutil::random_convex(rng, 20.0, 0);
        const Polygon b = testutil::random_star(rng, 20.0, 1);
        const Placement pa{rng.uniform(-10, 10), rng.uniform(-10, 10)};
        const Placement pb{rng.uniform(-10, 40), rng.uniform(-10, 10)};
        const Vec2 shift{rng.uniform(-100, 100), rng.uniform(-100, 100)};
        const Placement qa{pa.x + shift.x, pa.y + shift.y};
        const Placement qb{pb.x + shift.x, pb.y + shift.y};
        CHECK(distance(a, pa, b, pb) == doctest::Approx(distance(a, qa, b, qb)).epsilon(1e-9));
        CHECK(overlap_area(a, pa, b, pb) == doctest::Approx(overlap_area(a, qa, b, qb)).epsilon(1e-9));
    }
}

TEST_CASE("overlap/distance exclusivity") {
    Rng rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        const Polygon a = testutil::random_star(rng, 20.0, 0);
        const Polygon b = testutil::random_convex(rng, 20.0, 1);
        const Placement pa{0, 0};
        const Placement pb{rng.uniform(-25, 25), rng.uniform(-25, 25)};
        const double ov = overlap_area(a, pa, b, pb);
        if (ov > 1e-9) CHECK(distance(a, pa, b, pb) == 0.0);
    }
}

TEST_CASE("overlap_area examples") {
    const Polygon a = unit_square(0);
    const Polygon b = unit_square(1);
    CHECK(overlap_area(a, {0, 0}, b, {0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(overlap_area(a, {0, 0}, b, {5, 0}) == 0.0);
    CHECK(overlap_area(a, {0, 0}, b, {0.5, 0}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("overlap_area on concave pairs matches piece sum") {
    // L vs unit square placed in the notch: exactly the notch quadrant overlaps.
    const Polygon l = l_shape(0);
    const Polygon sq = unit_square(1);
    CHECK(overlap_area(l, {0, 0}, sq, {0.5, 0.5}) == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("contains") {
    const Polygon sq = unit_square();
    const Container strip = Container::strip(2.0);
    CHECK(contains(strip, sq, {0, 0}));
    CHECK_FALSE(contains(strip, sq, {0, 1.5}));
    CHECK(contains(strip, sq, {0, 1.0}));  // exactly touching the boundary
    CHECK_FALSE(contains(strip, sq, {-0.5, 0}));

    const Container box = Container::rect(3.0, 2.0);
    CHECK(contains(box, sq, {2.0, 1.0}));
    CHECK_FALSE(contains(box, sq, {2.5, 0}));
}

TEST_CASE("nfp of two unit squares is a 2x2 square") {
    const Polygon a = unit_square(0);
    const Polygon b = unit_square(1);
    const auto region = nfp(a, b);
    REQUIRE(region.size() == 1);
    CHECK(region[0].holes.empty());
    Vec2 lo, hi;
    bounding_box(region[0].outer, lo, hi);
    CHECK(lo.x == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(lo.y == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(hi.x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(hi.y == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(signed_area(region[0].outer)) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("nfp of rectangles has exact dimensions") {
    const Polygon a = rect(3.0, 2.0, 0);
    const Polygon b = rect(1.5, 0.5, 1);
    const auto region = nfp(a, b);
    REQUIRE(region.size() == 1);
    Vec2 lo, hi;
    bounding_box(region[0].outer, lo, hi);
    CHECK(hi.x - lo.x == doctest::Approx(4.5).epsilon(1e-12));
    CHECK(hi.y - lo.y == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(lo.x == doctest::Approx(-1.5).epsilon(1e-12));
    CHECK(lo.y == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("nfp boundary is the contact locus, interior overlaps") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const Polygon a = testutil::random_convex(rng, 30.0, 0);
        const Polygon b = testutil::random_convex(rng, 20.0, 1);
        const auto region = nfp(a, b);
        REQUIRE(!region.empty());

        // walk the outer boundary: contact placements
        const auto& outer = region[0].outer;
        for (std::size_t i = 0; i < outer.size(); i += 2) {
            const Vec2 v = outer[i];
            const Vec2 m = (outer[i] + outer[(i + 1) % outer.size()]) * 0.5;
            for (const Vec2& p : {v, m}) {
                CHECK(overlap_area(a, {0, 0}, b, {p.x, p.y}) <= 1e-9);
                CHECK(distance(a, {0, 0}, b, {p.x, p.y}) <= 1e-6);
            }
        }

        // grid oracle: classification by overlap matches point-in-region
        Vec2 lo, hi;
        bounding_box(outer, lo, hi);
        for (int gx = 0; gx < 8; ++gx) {
            for (int gy = 0; gy < 8; ++gy) {
                const Vec2 p{lo.x + (hi.x - lo.x) * (0.5 + gx) / 8.0,
                             lo.y + (hi.y - lo.y) * (0.5 + gy) / 8.0};
                const auto side = classify_point(region, p, 1e-7);
                if (side == PointSide::boundary) continue;
                const bool overlaps = overlap_area(a, {0, 0}, b, {p.x, p.y}) > 1e-9;
                CHECK(overlaps == (side == PointSide::inside));
            }
        }
    }
}

TEST_CASE("nfp of concave fixed polygon reports overlap correctly") {
    // Unit square orbiting an L: the notch does not admit the square, so the
    // NFP interior must cover the notch corner placement.
    const Polygon l = l_shape(0);
    const Polygon sq = unit_square(1);
    const auto region = nfp(l, sq);
    REQUIRE(!region.empty());
    const Vec2 notch{0.5, 0.5};  // square at the notch overlaps the L
    CHECK(overlap_area(l, {0, 0}, sq, {notch.x, notch.y}) > 1e-9);
    CHECK(classify_point(region, notch) == PointSide::inside);
    const Vec2 far{5.0, 5.0};
    CHECK(classify_point(region, far) == PointSide::outside);
}

TEST_CASE("minkowski sum of squares") {
    const auto sum = minkowski_sum(unit_square().vertices, unit_square().vertices);
    Vec2 lo, hi;
    bounding_box(sum, lo, hi);
    CHECK(lo == Vec2{0, 0});
    CHECK(hi == Vec2{2, 2});
    CHECK(signed_area(sum) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("gjk distance between touching squares is ~0") {
    const Polygon a = unit_square(0);
    const Polygon b = unit_square(1);
    CHECK(distance(a, {0, 0}, b, {1.0, 0}) <= 1e-9);
}
