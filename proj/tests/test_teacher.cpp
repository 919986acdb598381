#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "gradnest/teacher.hpp"
#include "test_util.hpp"

using namespace gradnest;
using namespace gradnest::geom;
using namespace gradnest::teacher;
using testutil::rect;
using testutil::unit_square;

namespace {

PackingInstance instance_of(std::vector<int> ids, Container c) {
    return PackingInstance{std::move(ids), c};
}

}  // namespace

TEST_CASE("blf places a lone square at the bottom-left corner") {
    std::vector<Polygon> pool{unit_square(0)};
    ShapeCache cache(pool);
    const auto inst = instance_of({0}, Container::strip(2.0));
    const std::vector<int> order{0};
    const auto sol = blf_place(order, inst, cache);
    CHECK(sol.placements[0].x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sol.placements[0].y == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("blf packs two unit squares into a height-1 strip exactly") {
    std::vector<Polygon> pool{unit_square(0)};
    ShapeCache cache(pool);
    const auto inst = instance_of({0, 0}, Container::strip(1.0));
    const std::vector<int> order{0, 1};
    const auto sol = blf_place(order, inst, cache);
    CHECK(sol.used_width == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(sol.utilization == doctest::Approx(1.0).epsilon(1e-9));

    // independent oracle: exhaustive grid of second-square placements
    double best_x = 1e9;
    for (double x = 0.0; x <= 3.0; x += 0.01) {
        const double ov = overlap_area(pool[0], {sol.placements[0].x, sol.placements[0].y}, pool[0], {x, 0.0});
        if (ov <= 1e-9) {
            best_x = x;
            break;
        }
    }
    CHECK(sol.placements[1].x == doctest::Approx(best_x).epsilon(1e-6));
}

TEST_CASE("blf output is always feasible") {
    Rng rng(3);
    std::vector<Polygon> pool;
    for (int i = 0; i < 6; ++i) {
        Polygon p = i % 2 == 0 ? testutil::random_convex(rng, 30.0, i) : testutil::random_star(rng, 30.0, i);
        p.id = i;
        pool.push_back(p);
    }
    ShapeCache cache(pool);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<int> ids;
        for (int k = 0; k < 7; ++k) ids.push_back(static_cast<int>(rng.below(pool.size())));
        const auto inst = instance_of(ids, Container::strip(150.0));
        std::vector<int> order(ids.size());
        std::iota(order.begin(), order.end(), 0);
        const auto sol = blf_place(order, inst, cache);
        CHECK(feasible(sol, inst, cache));
    }
}

TEST_CASE("blf reports the first unplaceable polygon") {
    std::vector<Polygon> pool{rect(3.0, 1.0, 0)};
    ShapeCache cache(pool);
    // two 3x1 rectangles cannot fit a 4x1.5 box
    const auto inst = instance_of({0, 0}, Container::rect(4.0, 1.5));
    const std::vector<int> order{0, 1};
    try {
        blf_place(order, inst, cache);
        FAIL("expected PlacementFailure");
    } catch (const PlacementFailure& e) {
        CHECK(e.item == 1);
    }
}

TEST_CASE("utilization conventions") {
    std::vector<Polygon> pool{unit_square(0)};
    ShapeCache cache(pool);
    const auto inst = instance_of({0}, Container::strip(2.0));
    TeacherSolution sol;
    sol.placements = {{0, 0}};
    sol.used_width = 1.0;
    CHECK(utilization(sol, inst, cache) == doctest::Approx(0.5).epsilon(1e-12));

    const auto empty = instance_of({}, Container::strip(2.0));
    TeacherSolution none;
    CHECK(utilization(none, empty, cache) == 0.0);
}

TEST_CASE("anneal at zero temperature only improves") {
    Rng rng(5);
    std::vector<Polygon> pool;
    for (int i = 0; i < 5; ++i) pool.push_back(testutil::random_convex(rng, 20.0, i));
    ShapeCache cache(pool);
    const auto inst = instance_of({0, 1, 2, 3, 4}, Container::strip(60.0));

    SAConfig cfg;
    cfg.iterations = 200;
    cfg.t0_scale = 0.0;
    Rng sa_rng(99);
    std::vector<double> trace;
    const auto sol = anneal(inst, cache, cfg, sa_rng, &trace);
    CHECK(feasible(sol, inst, cache));
    REQUIRE(!trace.empty());
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);

    std::vector<int> order(5);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return cache.area(inst.polygon_ids[(std::size_t)a]) > cache.area(inst.polygon_ids[(std::size_t)b]);
    });
    const auto initial = blf_place(order, inst, cache);
    CHECK(trace.back() <= objective(initial, inst, cache) + 1e-12);
}

TEST_CASE("anneal matches the exhaustive best over permutations on 5 rectangles") {
    Rng rng(21);
    for (int trial = 0; trial < 3; ++trial) {
        std::vector<Polygon> pool;
        for (int i = 0; i < 5; ++i)
            pool.push_back(rect(rng.uniform(10.0, 40.0), rng.uniform(10.0, 40.0), i));
        ShapeCache cache(pool);
        const auto inst = instance_of({0, 1, 2, 3, 4}, Container::strip(100.0));

        // oracle: every insertion order
        std::vector<int> perm{0, 1, 2, 3, 4};
        double best = 1e18;
        do {
            const auto sol = blf_place(perm, inst, cache);
            best = std::min(best, sol.used_width);
        } while (std::next_permutation(perm.begin(), perm.end()));

        SAConfig cfg;
        cfg.iterations = 2000;
        Rng sa_rng(1234 + trial);
        const auto sol = anneal(inst, cache, cfg, sa_rng);
        CHECK(sol.used_width == doctest::Approx(best).epsilon(1e-6));
    }
}

TEST_CASE("anneal is reproducible for a fixed seed") {
    Rng rng(31);
    std::vector<Polygon> pool;
    for (int i = 0; i < 6; ++i) pool.push_back(testutil::random_star(rng, 25.0, i));
    ShapeCache cache(pool);
    const auto inst = instance_of({0, 1, 2, 3, 4, 5}, Container::strip(80.0));
    SAConfig cfg;
    cfg.iterations = 150;

    Rng r1(77), r2(77);
    const auto a = anneal(inst, cache, cfg, r1);
    const auto b = anneal(inst, cache, cfg, r2);
    REQUIRE(a.placements.size() == b.placements.size());
    for (std::size_t i = 0; i < a.placements.size(); ++i) {
        CHECK(a.placements[i].x == b.placements[i].x);
        CHECK(a.placements[i].y == b.placements[i].y);
    }
}
