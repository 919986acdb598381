#include <doctest.h>

#include <cmath>

#include "gradnest/diffusion.hpp"
#include "gradnest/net.hpp"
#include "test_util.hpp"

using namespace gradnest;
using namespace gradnest::net;

namespace {

// Small enough for finite differences, large enough to exercise every block.
NetConfig tiny_config() {
    NetConfig c;
    c.points = 32;
    c.sa_width = {4, 6, 8};
    c.fg_dim = 8;
    c.fp_dim = 4;
    c.fc_dim = 4;
    c.ft_freqs = 2;
    c.ft_dim = 4;
    c.msg_hidden = 8;
    c.msg_dim = 8;
    c.pos_dim = 4;
    c.head_hidden = 8;
    return c;
}

std::vector<geom::Polygon> small_pool(int count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<geom::Polygon> pool;
    for (int i = 0; i < count; ++i) {
        auto p = i % 2 == 0 ? testutil::random_convex(rng, 150.0, i) : testutil::random_star(rng, 150.0, i);
        const auto c = geom::centroid(p);
        for (auto& v : p.vertices) v = v - c;
        p.id = i;
        pool.push_back(std::move(p));
    }
    return pool;
}

PackingInstance make_instance(std::vector<int> ids, double height = 1280.0) {
    return PackingInstance{std::move(ids), geom::Container::strip(height)};
}

SolutionState make_state(std::initializer_list<double> raw) {
    SolutionState s;
    for (double v : raw) s.v.push_back(v * kCoordScale);
    return s;
}

}  // namespace

TEST_CASE("geometry features have width 128 and are deterministic") {
    const auto pool = small_pool(2, 5);
    ScoreNet net(NetConfig{}, pool);
    Rng rng(1);
    const auto params = net.init_params(rng);
    const auto a = net.encode_shape(params, 0);
    const auto b = net.encode_shape(params, 0);
    REQUIRE(a.fg.size() == 128);
    for (std::size_t i = 0; i < a.fg.size(); ++i) CHECK(a.fg[i] == b.fg[i]);
}

TEST_CASE("congruent polygons share geometry features") {
    auto pool = small_pool(1, 9);
    auto copy = pool[0];
    copy.id = 1;
    pool.push_back(copy);
    ScoreNet net(tiny_config(), pool);
    Rng rng(2);
    const auto params = net.init_params(rng);
    const auto a = net.encode_shape(params, 0);
    const auto b = net.encode_shape(params, 1);
    REQUIRE(a.fg.size() == b.fg.size());
    for (std::size_t i = 0; i < a.fg.size(); ++i) CHECK(a.fg[i] == b.fg[i]);
}

TEST_CASE("build_graphs edge sets") {
    const auto pool = small_pool(3, 11);
    ScoreNet net(tiny_config(), pool);

    // far apart: complete global graph, empty local/intersection
    const auto inst = make_instance({0, 1, 2});
    const auto far = make_state({0.0, 0.0, 1000.0, 0.0, 0.0, 1000.0});
    auto g = net.build_graphs(inst, far);
    CHECK(g.global_edges.size() == 6);  // n(n-1)
    CHECK(g.local_edges.empty());
    CHECK(g.intersection_edges.empty());

    // two overlapping: pair present in all three sets
    const auto near = make_state({0.0, 0.0, 10.0, 0.0, 0.0, 1000.0});
    g = net.build_graphs(inst, near);
    CHECK(g.global_edges.size() == 6);
    auto has = [](const std::vector<std::pair<int, int>>& edges, int i, int j) {
        for (const auto& e : edges)
            if (e.first == i && e.second == j) return true;
        return false;
    };
    CHECK(has(g.local_edges, 0, 1));
    CHECK(has(g.local_edges, 1, 0));
    CHECK(has(g.intersection_edges, 0, 1));
    CHECK(has(g.intersection_edges, 1, 0));
    CHECK_FALSE(has(g.intersection_edges, 0, 2));
}

TEST_CASE("edge sets nest: intersection within local within global") {
    const auto pool = small_pool(4, 13);
    ScoreNet net(tiny_config(), pool);
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const auto inst = make_instance({0, 1, 2, 3});
        SolutionState s;
        for (int i = 0; i < 8; ++i) s.v.push_back(rng.uniform(-400.0, 400.0) * kCoordScale);
        const auto g = net.build_graphs(inst, s);
        auto contains_edge = [](const std::vector<std::pair<int, int>>& edges, std::pair<int, int> e) {
            return std::find(edges.begin(), edges.end(), e) != edges.end();
        };
        for (const auto& e : g.intersection_edges) CHECK(contains_edge(g.local_edges, e));
        for (const auto& e : g.local_edges) CHECK(contains_edge(g.global_edges, e));
    }
}

TEST_CASE("forward output shapes, determinism, field scaling") {
    const auto pool = small_pool(3, 19);
    ScoreNet net(tiny_config(), pool);
    Rng rng(3);
    const auto params = net.init_params(rng);
    const auto inst = make_instance({0, 1, 2});
    const auto s = make_state({100.0, 200.0, 500.0, 300.0, 900.0, 600.0});

    const auto f1 = net.forward(params, inst, s, 0.5);
    const auto f2 = net.forward(params, inst, s, 0.5);
    REQUIRE(f1.global_field.size() == 6);
    REQUIRE(f1.local_field.size() == 6);
    REQUIRE(f1.intersection_field.size() == 6);
    REQUIRE(f1.aggregate.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(f1.global_field[i] == f2.global_field[i]);
        CHECK(f1.aggregate[i] == f2.aggregate[i]);
        // aggregate is the mean of the three layers
        const double mean =
            (f1.global_field[i] + f1.local_field[i] + f1.intersection_field[i]) / 3.0;
        CHECK(f1.aggregate[i] == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("forward rejects bad inputs") {
    const auto pool = small_pool(2, 23);
    ScoreNet net(tiny_config(), pool);
    Rng rng(5);
    const auto params = net.init_params(rng);
    const auto inst = make_instance({0, 1});
    auto s = make_state({0.0, 0.0, 400.0, 0.0});
    CHECK_THROWS_AS(net.forward(params, inst, s, 1e-9), std::out_of_range);
    s.v[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(net.forward(params, inst, s, 0.5), std::invalid_argument);
}

TEST_CASE("forward is permutation equivariant") {
    const auto pool = small_pool(3, 29);
    ScoreNet net(tiny_config(), pool);
    Rng rng(7);
    const auto params = net.init_params(rng);

    const auto inst = make_instance({0, 1, 2});
    const auto s = make_state({50.0, 100.0, 420.0, 80.0, 260.0, 700.0});
    const auto f = net.forward(params, inst, s, 0.4);

    // permutation (2, 0, 1)
    const auto inst_p = make_instance({pool[2].id, pool[0].id, pool[1].id});
    const auto s_p = make_state({260.0, 700.0, 50.0, 100.0, 420.0, 80.0});
    const auto f_p = net.forward(params, inst_p, s_p, 0.4);

    const int perm[3] = {2, 0, 1};  // row i of f_p equals row perm[i] of f
    for (int i = 0; i < 3; ++i) {
        for (int d = 0; d < 2; ++d) {
            CHECK(f_p.aggregate[static_cast<std::size_t>(2 * i + d)] ==
                  f.aggregate[static_cast<std::size_t>(2 * perm[i] + d)]);
            CHECK(f_p.global_field[static_cast<std::size_t>(2 * i + d)] ==
                  f.global_field[static_cast<std::size_t>(2 * perm[i] + d)]);
        }
    }
}

TEST_CASE("positional messages are translation invariant") {
    const auto pool = small_pool(3, 31);
    ScoreNet net(tiny_config(), pool);
    Rng rng(11);
    const auto params = net.init_params(rng);
    const auto inst = make_instance({0, 1, 2});
    const auto s = make_state({100.0, 150.0, 450.0, 90.0, 820.0, 400.0});
    SolutionState shifted = s;
    for (std::size_t i = 0; i < shifted.v.size(); i += 2) {
        shifted.v[i] += 123.0 * kCoordScale;
        shifted.v[i + 1] -= 67.0 * kCoordScale;
    }

    ScoreNet::Tape ta, tb;
    ScoreNet::GeoCache geo;
    for (int id : inst.polygon_ids)
        if (!geo.count(id)) geo.emplace(id, net.encode_shape(params, id));
    (void)net.forward(params, inst, s, 0.5, geo, &ta);
    (void)net.forward(params, inst, shifted, 0.5, geo, &tb);

    REQUIRE(ta.layers[0].edges == tb.layers[0].edges);
    REQUIRE(ta.layers[0].p1.size() == tb.layers[0].p1.size());
    for (std::size_t i = 0; i < ta.layers[0].p1.size(); ++i)
        CHECK(ta.layers[0].p1[i] == doctest::Approx(tb.layers[0].p1[i]).epsilon(1e-12));
}

TEST_CASE("isolated nodes aggregate the zero message") {
    const auto pool = small_pool(2, 37);
    ScoreNet net(tiny_config(), pool);
    Rng rng(13);
    const auto params = net.init_params(rng);
    const auto inst = make_instance({0, 1});
    const auto s = make_state({0.0, 0.0, 1500.0, 0.0});  // far apart: local layer has no edges

    ScoreNet::Tape tape;
    ScoreNet::GeoCache geo;
    for (int id : inst.polygon_ids)
        if (!geo.count(id)) geo.emplace(id, net.encode_shape(params, id));
    (void)net.forward(params, inst, s, 0.5, geo, &tape);
    REQUIRE(tape.layers[1].edges.empty());
    for (double v : tape.layers[1].agg) CHECK(v == 0.0);
}

TEST_CASE("backward without forward is a state error") {
    const auto pool = small_pool(1, 41);
    ScoreNet net(tiny_config(), pool);
    Rng rng(17);
    const auto params = net.init_params(rng);
    auto grads = zeros_like(params);
    ScoreNet::Tape tape;  // never filled
    GradientField upstream;
    std::unordered_map<int, std::vector<double>> dfg;
    CHECK_THROWS_AS(net.backward(params, tape, upstream, grads, dfg), std::logic_error);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
    const auto pool = small_pool(2, 43);
    ScoreNet net(tiny_config(), pool);
    Rng rng(19);
    const auto params = net.init_params(rng);
    const auto inst = make_instance({0, 1});
    const auto s = make_state({0.0, 0.0, 120.0, 40.0});

    ScoreNet::Tape tape;
    ScoreNet::GeoCache geo;
    for (int id : inst.polygon_ids)
        if (!geo.count(id)) geo.emplace(id, net.encode_shape(params, id));
    (void)net.forward(params, inst, s, 0.5, geo, &tape);

    GradientField upstream;
    upstream.global_field.assign(4, 0.0);
    upstream.local_field.assign(4, 0.0);
    upstream.intersection_field.assign(4, 0.0);
    upstream.aggregate.assign(4, 0.0);
    auto grads = zeros_like(params);
    std::unordered_map<int, std::vector<double>> dfg;
    net.backward(params, tape, upstream, grads, dfg);
    for (auto& [id, v] : dfg)
        for (double g : v) CHECK(g == 0.0);
    for (const auto& [name, t] : grads)
        for (double g : t.v) CHECK(g == 0.0);
}

TEST_CASE("masked layer parameters receive exactly zero gradient") {
    const auto pool = small_pool(2, 47);
    auto cfg = tiny_config();
    cfg.layer_mask = {true, true, false};  // intersection disabled
    ScoreNet net(cfg, pool);
    Rng rng(23);
    const auto params = net.init_params(rng);

    const auto inst = make_instance({0, 1});
    teacher::TeacherSolution sol;
    sol.placements = {{0.0, 0.0}, {60.0, 30.0}};
    data::DatasetRecord rec{inst, sol, data::Split::train};
    const data::DatasetRecord* batch[] = {&rec};
    const auto res = diff::dsm_loss(net, params, batch, 7, 0, 1);
    bool any_nonzero = false;
    for (const auto& [name, t] : res.grads) {
        const bool frozen = name.rfind("isc.", 0) == 0;
        for (double g : t.v) {
            if (frozen) CHECK(g == 0.0);
            else any_nonzero = any_nonzero || g != 0.0;
        }
    }
    CHECK(any_nonzero);
}

TEST_CASE("analytic gradients match central finite differences") {
    const auto pool = small_pool(3, 53);
    ScoreNet net(tiny_config(), pool);
    Rng rng(29);
    auto params = net.init_params(rng);

    // two records so both sparse and dense graphs appear
    const auto inst1 = make_instance({0, 1, 2});
    teacher::TeacherSolution sol1;
    sol1.placements = {{0.0, 100.0}, {180.0, 60.0}, {90.0, 300.0}};
    const auto inst2 = make_instance({1, 1});
    teacher::TeacherSolution sol2;
    sol2.placements = {{40.0, 40.0}, {220.0, 90.0}};
    data::DatasetRecord rec1{inst1, sol1, data::Split::train};
    data::DatasetRecord rec2{inst2, sol2, data::Split::train};
    const data::DatasetRecord* batch[] = {&rec1, &rec2};

    const std::uint64_t seed = 99, stream = 5;
    const auto res = diff::dsm_loss(net, params, batch, seed, stream, 1);

    const double h = 1e-4;
    double worst = 0.0;
    std::string worst_name;
    for (auto& [name, t] : params) {
        // probe a deterministic subset of each block to keep the test quick
        const std::size_t n = t.v.size();
        const std::size_t step = std::max<std::size_t>(1, n / 6);
        for (std::size_t i = 0; i < n; i += step) {
            const double keep = t.v[i];
            t.v[i] = keep + h;
            const double lp = diff::dsm_loss(net, params, batch, seed, stream, 1).loss;
            t.v[i] = keep - h;
            const double lm = diff::dsm_loss(net, params, batch, seed, stream, 1).loss;
            t.v[i] = keep;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = res.grads.at(name).v[i];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
            if (rel > worst) {
                worst = rel;
                worst_name = name;
            }
        }
    }
    INFO("worst block: ", worst_name);
    CHECK(worst < 1e-4);
}
