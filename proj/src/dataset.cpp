#include "gradnest/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <numbers>
#include <numeric>

#include "gradnest/parallel.hpp"

namespace gradnest::data {

using geom::Polygon;
using geom::Vec2;

const char* family_name(Family f) {
    switch (f) {
        case Family::convex: return "convex";
        case Family::concave: return "concave";
        case Family::star: return "star";
        case Family::rectilinear: return "rectilinear";
    }
    return "unknown";
}

Family family_from_name(const std::string& name) {
    if (name == "convex") return Family::convex;
    if (name == "concave") return Family::concave;
    if (name == "star") return Family::star;
    if (name == "rectilinear") return Family::rectilinear;
    throw ParseError("unknown polygon family: " + name);
}

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(),
              [](const Vec2& a, const Vec2& b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
    auto build = [&](auto begin, auto end) {
        std::vector<Vec2> h;
        for (auto it = begin; it != end; ++it) {
            while (h.size() >= 2 && geom::cross(h[h.size() - 1] - h[h.size() - 2], *it - h[h.size() - 2]) <= 0)
                h.pop_back();
            h.push_back(*it);
        }
        h.pop_back();
        return h;
    };
    auto lower = build(pts.begin(), pts.end());
    auto upper = build(pts.rbegin(), pts.rend());
    lower.insert(lower.end(), upper.begin(), upper.end());
    return lower;
}

std::vector<Vec2> gen_convex(Rng& rng) {
    const int m = 8 + static_cast<int>(rng.below(8));
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const double a = rng.uniform(0.0, 2.0 * kPi);
        const double r = std::sqrt(rng.uniform(0.1, 1.0));
        pts.push_back({r * std::cos(a), r * std::sin(a)});
    }
    return convex_hull(std::move(pts));
}

std::vector<Vec2> gen_radial(Rng& rng, int k_min, int k_max, double r_lo, double r_hi) {
    const int k = k_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(k_max - k_min + 1)));
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const double a = 2.0 * kPi * (static_cast<double>(i) + rng.uniform(0.1, 0.9)) / static_cast<double>(k);
        const double r = rng.uniform(r_lo, r_hi);
        pts.push_back({r * std::cos(a), r * std::sin(a)});
    }
    return pts;
}

std::vector<Vec2> gen_star(Rng& rng) {
    const int spikes = 5 + static_cast<int>(rng.below(4));
    const double inner = rng.uniform(0.35, 0.55);
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(2 * spikes));
    for (int i = 0; i < 2 * spikes; ++i) {
        const double a = kPi * static_cast<double>(i) / static_cast<double>(spikes) + rng.uniform(-0.05, 0.05);
        const double r = (i % 2 == 0 ? rng.uniform(0.85, 1.0) : inner * rng.uniform(0.85, 1.15));
        pts.push_back({r * std::cos(a), r * std::sin(a)});
    }
    return pts;
}

std::vector<Vec2> gen_rectilinear(Rng& rng) {
    const double w = rng.uniform(0.8, 1.0);
    const double h = rng.uniform(0.6, 1.0);
    switch (rng.below(4)) {
        case 0: {  // L
            const double a = rng.uniform(0.3, 0.6) * w;
            const double b = rng.uniform(0.3, 0.6) * h;
            return {{0, 0}, {w, 0}, {w, b}, {a, b}, {a, h}, {0, h}};
        }
        case 1: {  // T
            const double bar = rng.uniform(0.25, 0.45) * h;
            const double stem = rng.uniform(0.25, 0.5) * w;
            const double x0 = 0.5 * (w - stem);
            return {{x0, 0}, {x0 + stem, 0}, {x0 + stem, h - bar}, {w, h - bar},
                    {w, h},  {0, h},         {0, h - bar},         {x0, h - bar}};
        }
        case 2: {  // U
            const double notch_w = rng.uniform(0.3, 0.5) * w;
            const double depth = rng.uniform(0.4, 0.7) * h;
            const double x1 = 0.5 * (w - notch_w);
            const double x2 = x1 + notch_w;
            return {{0, 0}, {w, 0}, {w, h}, {x2, h}, {x2, h - depth}, {x1, h - depth}, {x1, h}, {0, h}};
        }
        default: {  // plus
            const double s = rng.uniform(0.25, 0.45) * w;
            const double t = rng.uniform(0.25, 0.45) * h;
            const double a = 0.5 * (w - s);
            const double b = 0.5 * (h - t);
            return {{a, 0},     {a + s, 0},     {a + s, b},     {w, b},     {w, b + t}, {a + s, b + t},
                    {a + s, h}, {a, h},         {a, b + t},     {0, b + t}, {0, b},     {a, b}};
        }
    }
}

Polygon finish_shape(std::vector<Vec2> pts, double target_diameter, int id) {
    Polygon p;
    p.vertices = std::move(pts);
    p.id = id;
    const Vec2 c = geom::centroid(p);
    for (Vec2& v : p.vertices) v = v - c;
    const double d = geom::diameter(p);
    const double s = target_diameter / d;
    for (Vec2& v : p.vertices) v = v * s;
    // re-centre after scaling to kill drift
    const Vec2 c2 = geom::centroid(p);
    for (Vec2& v : p.vertices) v = v - c2;
    geom::validate_polygon(p);
    return p;
}

}  // namespace

PolygonPool synth_pool(const PoolConfig& cfg, Rng& rng) {
    PolygonPool pool;
    const int total = cfg.convex + cfg.concave + cfg.star + cfg.rectilinear;
    pool.polygons.reserve(static_cast<std::size_t>(total));
    pool.tags.reserve(static_cast<std::size_t>(total));

    auto add = [&](Family fam, int count) {
        for (int i = 0; i < count; ++i) {
            const int id = static_cast<int>(pool.polygons.size());
            const double target = rng.uniform(cfg.diameter_min, cfg.diameter_max);
            for (int attempt = 0;; ++attempt) {
                std::vector<Vec2> pts;
                switch (fam) {
                    case Family::convex: pts = gen_convex(rng); break;
                    case Family::concave: pts = gen_radial(rng, 10, 16, 0.55, 1.0); break;
                    case Family::star: pts = gen_star(rng); break;
                    case Family::rectilinear: pts = gen_rectilinear(rng); break;
                }
                try {
                    pool.polygons.push_back(finish_shape(std::move(pts), target, id));
                    pool.tags.push_back(fam);
                    break;
                } catch (const geom::GeometryError&) {
                    if (attempt >= 50) throw;
                }
            }
        }
    };
    add(Family::convex, cfg.convex);
    add(Family::concave, cfg.concave);
    add(Family::star, cfg.star);
    add(Family::rectilinear, cfg.rectilinear);
    return pool;
}

PackingInstance sample_instance(const PolygonPool& pool, int n, const ContainerRange& range, Rng& rng,
                                std::span<const int> allowed) {
    if (pool.polygons.empty()) throw std::invalid_argument("sample_instance: empty pool");
    if (n < 1) throw std::invalid_argument("sample_instance: n must be positive");
    if (range.lo > range.hi || range.lo < 640.0 || range.hi > 3920.0)
        throw std::invalid_argument("sample_instance: container range must lie in [640, 3920]");

    PackingInstance inst;
    inst.polygon_ids.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::size_t pick = static_cast<std::size_t>(
            rng.below(allowed.empty() ? pool.polygons.size() : allowed.size()));
        inst.polygon_ids.push_back(allowed.empty() ? static_cast<int>(pick) : allowed[pick]);
    }

    for (int attempt = 0; attempt < 100; ++attempt) {
        geom::Container c;
        c.kind = range.kind;
        c.height = rng.uniform(range.lo, range.hi);
        if (range.kind == geom::Container::Kind::rectangle) c.width = rng.uniform(range.lo, range.hi);

        bool fits = true;
        for (int id : inst.polygon_ids) {
            Vec2 lo, hi;
            geom::bounding_box(pool.polygons[static_cast<std::size_t>(id)].vertices, lo, hi);
            if (hi.y - lo.y > c.height ||
                (range.kind == geom::Container::Kind::rectangle && hi.x - lo.x > c.width)) {
                fits = false;
                break;
            }
        }
        if (fits) {
            inst.container = c;
            return inst;
        }
    }
    throw std::runtime_error("sample_instance: no container admitted the sampled shapes after 100 retries");
}

Dataset build_dataset(const PolygonPool& pool, const BuildConfig& cfg) {
    Dataset ds;
    ds.pool = pool;

    // Shape-level split first; instances never mix the two shape sets.
    std::vector<int> ids(pool.polygons.size());
    std::iota(ids.begin(), ids.end(), 0);
    Rng split_rng(cfg.seed, 0x5b11);
    for (std::size_t i = ids.size(); i > 1; --i)
        std::swap(ids[i - 1], ids[static_cast<std::size_t>(split_rng.below(i))]);
    const auto n_train = static_cast<std::size_t>(
        std::llround(cfg.train_fraction * static_cast<double>(ids.size())));
    ds.train_shape_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    ds.test_shape_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
    std::sort(ds.train_shape_ids.begin(), ds.train_shape_ids.end());
    std::sort(ds.test_shape_ids.begin(), ds.test_shape_ids.end());

    teacher::ShapeCache cache(pool.polygons);
    const int total = cfg.train_instances + cfg.test_instances;
    std::vector<DatasetRecord> slots(static_cast<std::size_t>(total));
    std::vector<char> ok(static_cast<std::size_t>(total), 0);
    std::atomic<int> dropped{0};

    parallel_for(total, cfg.jobs, [&](int i) {
        const bool is_train = i < cfg.train_instances;
        Rng rng(cfg.seed, 0x10000u + static_cast<std::uint64_t>(i));
        try {
            const int n = cfg.n_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.n_max - cfg.n_min + 1)));
            auto inst = sample_instance(pool, n, cfg.container, rng,
                                        is_train ? ds.train_shape_ids : ds.test_shape_ids);
            Rng sa_rng(cfg.seed, 0x20000u + static_cast<std::uint64_t>(i));
            auto sol = teacher::anneal(inst, cache, cfg.sa, sa_rng);
            if (!teacher::feasible(sol, inst, cache)) throw std::runtime_error("teacher produced infeasible layout");
            slots[static_cast<std::size_t>(i)] =
                DatasetRecord{std::move(inst), std::move(sol), is_train ? Split::train : Split::test};
            ok[static_cast<std::size_t>(i)] = 1;
        } catch (const std::exception& e) {
            ++dropped;
            std::cerr << "[dataset] dropping instance " << i << ": " << e.what() << "\n";
        }
    });

    ds.records.reserve(static_cast<std::size_t>(total));
    for (int i = 0; i < total; ++i)
        if (ok[static_cast<std::size_t>(i)]) ds.records.push_back(std::move(slots[static_cast<std::size_t>(i)]));
    return ds;
}

}  // namespace gradnest::data
