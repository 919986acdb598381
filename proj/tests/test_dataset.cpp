#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "gradnest/dataset.hpp"
#include "test_util.hpp"

using namespace gradnest;
using namespace gradnest::data;

namespace {

std::filesystem::path tmp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("synth_pool is deterministic and honours counts/tags") {
    PoolConfig cfg;
    cfg.convex = 40;
    cfg.concave = 40;
    cfg.star = 0;
    cfg.rectilinear = 0;

    Rng r1(123), r2(123);
    const auto a = synth_pool(cfg, r1);
    const auto b = synth_pool(cfg, r2);

    REQUIRE(a.polygons.size() == 80);
    REQUIRE(a.tags.size() == 80);
    CHECK(std::count(a.tags.begin(), a.tags.end(), Family::convex) == 40);
    CHECK(std::count(a.tags.begin(), a.tags.end(), Family::concave) == 40);

    REQUIRE(b.polygons.size() == a.polygons.size());
    for (std::size_t i = 0; i < a.polygons.size(); ++i) {
        REQUIRE(a.polygons[i].vertices.size() == b.polygons[i].vertices.size());
        for (std::size_t k = 0; k < a.polygons[i].vertices.size(); ++k)
            CHECK(a.polygons[i].vertices[k] == b.polygons[i].vertices[k]);
    }
}

TEST_CASE("synth_pool diameters stay in the configured range") {
    PoolConfig cfg;  // all four families
    Rng rng(7);
    const auto pool = synth_pool(cfg, rng);
    REQUIRE(pool.polygons.size() == 80);
    for (const auto& p : pool.polygons) {
        CHECK_NOTHROW(geom::validate_polygon(p));
        const double d = geom::diameter(p);
        CHECK(d >= cfg.diameter_min - 1e-6);
        CHECK(d <= cfg.diameter_max + 1e-6);
    }
}

TEST_CASE("sample_instance stays within the height range") {
    PoolConfig cfg;
    Rng rng(11);
    const auto pool = synth_pool(cfg, rng);
    ContainerRange range;  // strip, [1280, 1920]
    for (int i = 0; i < 50; ++i) {
        const auto inst = sample_instance(pool, 48, range, rng);
        CHECK(inst.polygon_ids.size() == 48);
        CHECK(inst.container.height >= 1280.0);
        CHECK(inst.container.height <= 1920.0);
    }
    const auto single = sample_instance(pool, 1, range, rng);
    CHECK(single.polygon_ids.size() == 1);
}

TEST_CASE("sample_instance heights are uniform within 3% per decile") {
    PoolConfig cfg;
    cfg.convex = 10;
    cfg.concave = 0;
    cfg.star = 0;
    cfg.rectilinear = 0;
    cfg.diameter_max = 300.0;  // keep retries out of the picture
    Rng rng(13);
    const auto pool = synth_pool(cfg, rng);

    ContainerRange range;
    const int draws = 10000;
    int deciles[10] = {};
    for (int i = 0; i < draws; ++i) {
        const auto inst = sample_instance(pool, 4, range, rng);
        const double u = (inst.container.height - range.lo) / (range.hi - range.lo);
        int d = static_cast<int>(u * 10.0);
        if (d == 10) d = 9;
        ++deciles[d];
    }
    for (int d = 0; d < 10; ++d)
        CHECK(std::abs(deciles[d] / static_cast<double>(draws) - 0.1) < 0.01);
}

TEST_CASE("sample_instance validates the container range") {
    PoolConfig cfg;
    Rng rng(17);
    const auto pool = synth_pool(cfg, rng);
    ContainerRange bad;
    bad.lo = 100.0;
    bad.hi = 200.0;
    CHECK_THROWS_AS(sample_instance(pool, 4, bad, rng), std::invalid_argument);
}

TEST_CASE("build_dataset splits shapes 70/30 and keeps splits disjoint") {
    PoolConfig pc;
    pc.convex = 60;
    pc.concave = 40;
    pc.star = 0;
    pc.rectilinear = 0;
    Rng rng(19);
    const auto pool = synth_pool(pc, rng);

    BuildConfig bc;
    bc.train_instances = 6;
    bc.test_instances = 3;
    bc.n_min = bc.n_max = 4;
    bc.sa.iterations = 20;
    bc.seed = 5;
    const auto ds = build_dataset(pool, bc);

    CHECK(ds.train_shape_ids.size() == 70);
    CHECK(ds.test_shape_ids.size() == 30);

    std::set<int> train(ds.train_shape_ids.begin(), ds.train_shape_ids.end());
    for (int id : ds.test_shape_ids) CHECK(train.count(id) == 0);

    teacher::ShapeCache cache(ds.pool.polygons);
    for (const auto& rec : ds.records) {
        // instances draw only from their split's shapes
        for (int id : rec.instance.polygon_ids) {
            const bool in_train = train.count(id) > 0;
            CHECK(in_train == (rec.split == Split::train));
        }
        CHECK(teacher::feasible(rec.solution, rec.instance, cache));
    }
}

TEST_CASE("build_dataset with zero instances is empty") {
    PoolConfig pc;
    pc.convex = 4;
    pc.concave = 0;
    pc.star = 0;
    pc.rectilinear = 0;
    Rng rng(23);
    const auto pool = synth_pool(pc, rng);
    BuildConfig bc;
    bc.train_instances = 0;
    bc.test_instances = 0;
    const auto ds = build_dataset(pool, bc);
    CHECK(ds.records.empty());
}

TEST_CASE("dataset round-trips losslessly") {
    PoolConfig pc;
    pc.convex = 6;
    pc.concave = 4;
    pc.star = 2;
    pc.rectilinear = 2;
    Rng rng(29);
    const auto pool = synth_pool(pc, rng);

    BuildConfig bc;
    bc.train_instances = 4;
    bc.test_instances = 2;
    bc.n_min = bc.n_max = 3;
    bc.sa.iterations = 15;
    bc.seed = 77;
    const auto ds = build_dataset(pool, bc);
    REQUIRE(!ds.records.empty());

    const auto path = tmp_file("gradnest_ds_roundtrip.txt");
    save_dataset(ds, path.string());
    const auto back = load_dataset(path.string());

    REQUIRE(back.records.size() == ds.records.size());
    REQUIRE(back.pool.polygons.size() == ds.pool.polygons.size());
    for (std::size_t i = 0; i < ds.pool.polygons.size(); ++i) {
        CHECK(back.pool.tags[i] == ds.pool.tags[i]);
        REQUIRE(back.pool.polygons[i].vertices.size() == ds.pool.polygons[i].vertices.size());
        for (std::size_t k = 0; k < ds.pool.polygons[i].vertices.size(); ++k)
            CHECK(back.pool.polygons[i].vertices[k] == ds.pool.polygons[i].vertices[k]);  // bit exact
    }
    CHECK(back.train_shape_ids == ds.train_shape_ids);
    CHECK(back.test_shape_ids == ds.test_shape_ids);
    teacher::ShapeCache cache(back.pool.polygons);
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const auto& a = ds.records[i];
        const auto& b = back.records[i];
        CHECK(a.split == b.split);
        CHECK(a.instance.polygon_ids == b.instance.polygon_ids);
        REQUIRE(a.solution.placements.size() == b.solution.placements.size());
        for (std::size_t k = 0; k < a.solution.placements.size(); ++k) {
            CHECK(a.solution.placements[k].x == b.solution.placements[k].x);
            CHECK(a.solution.placements[k].y == b.solution.placements[k].y);
        }
        CHECK(teacher::feasible(b.solution, b.instance, cache));
    }

    // empty dataset round-trips too
    Dataset empty;
    empty.pool = pool;
    save_dataset(empty, path.string());
    const auto back2 = load_dataset(path.string());
    CHECK(back2.records.empty());
    std::filesystem::remove(path);
}

TEST_CASE("truncated dataset file reports a parse error with a line number") {
    PoolConfig pc;
    pc.convex = 3;
    pc.concave = 0;
    pc.star = 0;
    pc.rectilinear = 0;
    Rng rng(31);
    const auto pool = synth_pool(pc, rng);
    BuildConfig bc;
    bc.train_instances = 2;
    bc.test_instances = 0;
    bc.n_min = bc.n_max = 2;
    bc.sa.iterations = 10;
    const auto ds = build_dataset(pool, bc);

    const auto path = tmp_file("gradnest_ds_trunc.txt");
    save_dataset(ds, path.string());

    std::ifstream in(path);
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path);
    out << all.substr(0, all.size() * 2 / 3);
    out.close();

    try {
        load_dataset(path.string());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("plain polygon files round-trip") {
    std::vector<geom::Polygon> polys{testutil::unit_square(3), testutil::l_shape(9)};
    const auto path = tmp_file("gradnest_polys.txt");
    save_polygons(polys, path.string());
    const auto back = load_polygons(path.string());
    REQUIRE(back.size() == 2);
    CHECK(back[0].id == 3);
    CHECK(back[1].id == 9);
    CHECK(back[1].vertices == polys[1].vertices);
    std::filesystem::remove(path);
}
