#include "gradnest/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gradnest::teacher {

using geom::ConvexPiece;
using geom::Placement;
using geom::Vec2;

ShapeCache::ShapeCache(std::span<const geom::Polygon> pool) {
    pool_.assign(pool.begin(), pool.end());
    pieces_.reserve(pool_.size());
    areas_.reserve(pool_.size());
    diameters_.reserve(pool_.size());
    for (const geom::Polygon& p : pool_) {
        pieces_.push_back(geom::convex_decompose(p));
        areas_.push_back(geom::signed_area(p.vertices));
        diameters_.push_back(geom::diameter(p));
    }
}

const std::vector<ConvexPiece>& ShapeCache::pieces(int id) const {
    return pieces_[static_cast<std::size_t>(id)];
}

const std::vector<ConvexPiece>& ShapeCache::nfp(int fixed_id, int orbiting_id) {
    const std::uint64_t key =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(fixed_id)) << 32) |
        static_cast<std::uint32_t>(orbiting_id);
    std::lock_guard lock(mu_);
    auto it = nfps_.find(key);
    if (it != nfps_.end()) return it->second;
    auto pieces = geom::nfp_pieces(pieces_[static_cast<std::size_t>(fixed_id)],
                                   pieces_[static_cast<std::size_t>(orbiting_id)]);
    return nfps_.emplace(key, std::move(pieces)).first->second;
}

namespace {

struct Ifr {
    double xmin, xmax, ymin, ymax;
    bool empty() const { return xmax < xmin - geom::kContainTol || ymax < ymin - geom::kContainTol; }
};

Ifr inner_fit(const geom::Polygon& shape, const geom::Container& c) {
    Vec2 lo, hi;
    geom::bounding_box(shape.vertices, lo, hi);
    Ifr r{};
    r.xmin = -lo.x;
    r.ymin = -lo.y;
    r.ymax = c.height - hi.y;
    r.xmax = c.kind == geom::Container::Kind::rectangle ? c.width - hi.x
                                                        : std::numeric_limits<double>::infinity();
    return r;
}

bool in_ifr(const Ifr& r, const Vec2& p) {
    const double tol = geom::kContainTol;
    return p.x >= r.xmin - tol && p.x <= r.xmax + tol && p.y >= r.ymin - tol && p.y <= r.ymax + tol;
}

struct Segment {
    Vec2 a, b;
};

void collect_segments(const std::vector<ConvexPiece>& pieces, const Vec2& shift, std::vector<Segment>& out) {
    for (const ConvexPiece& p : pieces) {
        const std::size_t n = p.vertices.size();
        for (std::size_t i = 0; i < n; ++i)
            out.push_back({p.vertices[i] + shift, p.vertices[(i + 1) % n] + shift});
    }
}

bool intersect(const Segment& s, const Segment& t, Vec2& out) {
    const Vec2 r = s.b - s.a;
    const Vec2 q = t.b - t.a;
    const double den = geom::cross(r, q);
    if (std::abs(den) < 1e-14) return false;
    const Vec2 d = t.a - s.a;
    const double u = geom::cross(d, q) / den;
    const double v = geom::cross(d, r) / den;
    if (u < -1e-12 || u > 1.0 + 1e-12 || v < -1e-12 || v > 1.0 + 1e-12) return false;
    out = s.a + r * u;
    return true;
}

}  // namespace

TeacherSolution blf_place(std::span<const int> order, const PackingInstance& inst, ShapeCache& cache) {
    const std::size_t n = inst.polygon_ids.size();
    TeacherSolution sol;
    sol.placements.assign(n, Placement{});

    std::vector<int> placed_items;  // instance item indices, insertion order
    placed_items.reserve(n);

    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const int item = order[pos];
        const int sid = inst.polygon_ids[static_cast<std::size_t>(item)];
        const geom::Polygon& shape = cache.shape(sid);
        const Ifr ifr = inner_fit(shape, inst.container);
        if (ifr.empty())
            throw PlacementFailure("polygon does not fit the container", static_cast<int>(pos));

        // Candidate placements: IFR corners, NFP vertices, NFP edge
        // crossings, and NFP edge / IFR boundary crossings. For a
        // translation-only BLF the optimum lies on one of these.
        std::vector<Vec2> cand;
        cand.push_back({ifr.xmin, ifr.ymin});
        cand.push_back({ifr.xmin, ifr.ymax});
        if (std::isfinite(ifr.xmax)) {
            cand.push_back({ifr.xmax, ifr.ymin});
            cand.push_back({ifr.xmax, ifr.ymax});
        }

        std::vector<Segment> segs;
        double safe_x = ifr.xmin;
        for (int j : placed_items) {
            const int fid = inst.polygon_ids[static_cast<std::size_t>(j)];
            const auto& nfp = cache.nfp(fid, sid);
            const Vec2 shift = sol.placements[static_cast<std::size_t>(j)].vec();
            for (const ConvexPiece& p : nfp) {
                for (const Vec2& v : p.vertices) {
                    const Vec2 c = v + shift;
                    if (in_ifr(ifr, c)) cand.push_back(c);
                    safe_x = std::max(safe_x, c.x);
                }
            }
            collect_segments(nfp, shift, segs);
        }

        Vec2 hit;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            for (std::size_t j = i + 1; j < segs.size(); ++j) {
                if (intersect(segs[i], segs[j], hit) && in_ifr(ifr, hit)) cand.push_back(hit);
            }
            // Crossings with the inner-fit boundary lines.
            const Segment& s = segs[i];
            const double lines_x[2] = {ifr.xmin, ifr.xmax};
            const double lines_y[2] = {ifr.ymin, ifr.ymax};
            for (double lx : lines_x) {
                if (!std::isfinite(lx)) continue;
                const double dx = s.b.x - s.a.x;
                if (std::abs(dx) < 1e-14) continue;
                const double t = (lx - s.a.x) / dx;
                if (t < -1e-12 || t > 1.0 + 1e-12) continue;
                const Vec2 c{lx, s.a.y + (s.b.y - s.a.y) * t};
                if (in_ifr(ifr, c)) cand.push_back(c);
            }
            for (double ly : lines_y) {
                const double dy = s.b.y - s.a.y;
                if (std::abs(dy) < 1e-14) continue;
                const double t = (ly - s.a.y) / dy;
                if (t < -1e-12 || t > 1.0 + 1e-12) continue;
                const Vec2 c{s.a.x + (s.b.x - s.a.x) * t, ly};
                if (in_ifr(ifr, c)) cand.push_back(c);
            }
        }

        if (inst.container.kind == geom::Container::Kind::strip && !placed_items.empty())
            cand.push_back({safe_x, ifr.ymin});  // always-feasible fallback on a strip

        std::sort(cand.begin(), cand.end(), [](const Vec2& a, const Vec2& b) {
            if (a.x != b.x) return a.x < b.x;
            return a.y < b.y;
        });
        cand.erase(std::unique(cand.begin(), cand.end(),
                               [](const Vec2& a, const Vec2& b) {
                                   return std::abs(a.x - b.x) <= 1e-12 && std::abs(a.y - b.y) <= 1e-12;
                               }),
                   cand.end());

        const auto& my_pieces = cache.pieces(sid);
        const double my_area = cache.area(sid);
        bool done = false;
        for (const Vec2& c : cand) {
            bool ok = true;
            for (int j : placed_items) {
                const int fid = inst.polygon_ids[static_cast<std::size_t>(j)];
                const double tol = geom::pair_overlap_tolerance(my_area, cache.area(fid));
                const double ov = geom::overlap_area(my_pieces, c, cache.pieces(fid),
                                                     sol.placements[static_cast<std::size_t>(j)].vec());
                if (ov > tol) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                sol.placements[static_cast<std::size_t>(item)] = {c.x, c.y};
                done = true;
                break;
            }
        }
        if (!done)
            throw PlacementFailure("no feasible position in rectangle container", static_cast<int>(pos));
        placed_items.push_back(item);
    }

    // used width over all placed vertices
    double xmin = std::numeric_limits<double>::infinity();
    double xmax = -xmin;
    for (int item : placed_items) {
        const std::size_t i = static_cast<std::size_t>(item);
        const geom::Polygon& shape = cache.shape(inst.polygon_ids[i]);
        for (const Vec2& v : shape.vertices) {
            xmin = std::min(xmin, v.x + sol.placements[i].x);
            xmax = std::max(xmax, v.x + sol.placements[i].x);
        }
    }
    sol.used_width = placed_items.empty() ? 0.0 : xmax - xmin;
    sol.utilization = utilization(sol, inst, cache);
    return sol;
}

double utilization(const TeacherSolution& sol, const PackingInstance& inst, ShapeCache& cache) {
    if (inst.polygon_ids.empty()) return 0.0;
    double total = 0.0;
    for (int id : inst.polygon_ids) total += cache.area(id);
    if (inst.container.kind == geom::Container::Kind::rectangle)
        return total / (inst.container.width * inst.container.height);
    const double denom = inst.container.height * sol.used_width;
    return denom > 0.0 ? total / denom : 0.0;
}

double objective(const TeacherSolution& sol, const PackingInstance& inst, ShapeCache& cache) {
    if (inst.container.kind == geom::Container::Kind::strip) return sol.used_width;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (std::size_t i = 0; i < inst.polygon_ids.size(); ++i) {
        const geom::Polygon& shape = cache.shape(inst.polygon_ids[i]);
        for (const Vec2& v : shape.vertices) {
            xmin = std::min(xmin, v.x + sol.placements[i].x);
            xmax = std::max(xmax, v.x + sol.placements[i].x);
            ymin = std::min(ymin, v.y + sol.placements[i].y);
            ymax = std::max(ymax, v.y + sol.placements[i].y);
        }
    }
    if (inst.polygon_ids.empty()) return 0.0;
    return (xmax - xmin) * (ymax - ymin);
}

bool feasible(const TeacherSolution& sol, const PackingInstance& inst, ShapeCache& cache) {
    const std::size_t n = inst.polygon_ids.size();
    for (std::size_t i = 0; i < n; ++i) {
        const int id = inst.polygon_ids[i];
        if (!geom::contains(inst.container, cache.shape(id), sol.placements[i])) return false;
        for (std::size_t j = i + 1; j < n; ++j) {
            const int jd = inst.polygon_ids[j];
            const double tol = geom::pair_overlap_tolerance(cache.area(id), cache.area(jd));
            const double ov = geom::overlap_area(cache.pieces(id), sol.placements[i].vec(),
                                                 cache.pieces(jd), sol.placements[j].vec());
            if (ov > tol) return false;
        }
    }
    return true;
}

TeacherSolution anneal(const PackingInstance& inst, ShapeCache& cache, const SAConfig& cfg, Rng& rng,
                       std::vector<double>* best_trace) {
    const std::size_t n = inst.polygon_ids.size();
    if (n == 0) return TeacherSolution{{}, 0.0, 0.0};

    // Initial order: decreasing area, ties by item index.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double aa = cache.area(inst.polygon_ids[static_cast<std::size_t>(a)]);
        const double ab = cache.area(inst.polygon_ids[static_cast<std::size_t>(b)]);
        if (aa != ab) return aa > ab;
        return a < b;
    });

    double mean_diam = 0.0;
    for (int id : inst.polygon_ids) mean_diam += cache.shape_diameter(id);
    mean_diam /= static_cast<double>(n);

    const double inf = std::numeric_limits<double>::infinity();
    auto evaluate = [&](std::span<const int> seq, TeacherSolution& out) -> double {
        try {
            out = blf_place(seq, inst, cache);
        } catch (const PlacementFailure&) {
            return inf;
        }
        return objective(out, inst, cache);
    };

    TeacherSolution cur_sol;
    double cur_obj = evaluate(order, cur_sol);
    TeacherSolution best_sol = cur_sol;
    double best_obj = cur_obj;

    double temp = cfg.t0_scale * mean_diam;
    for (int it = 0; it < cfg.iterations; ++it) {
        if (n >= 2) {
            std::size_t i = static_cast<std::size_t>(rng.below(n));
            std::size_t j = static_cast<std::size_t>(rng.below(n - 1));
            if (j >= i) ++j;
            std::swap(order[i], order[j]);

            TeacherSolution next_sol;
            const double next_obj = evaluate(order, next_sol);
            bool accept = false;
            if (next_obj < inf) {
                const double delta = next_obj - cur_obj;
                if (delta <= 0.0) accept = true;
                else if (temp > 0.0) accept = rng.uniform01() < std::exp(-delta / temp);
            }
            if (accept) {
                cur_sol = std::move(next_sol);
                cur_obj = next_obj;
                if (cur_obj < best_obj) {
                    best_obj = cur_obj;
                    best_sol = cur_sol;
                }
            } else {
                std::swap(order[i], order[j]);
            }
        }
        temp *= cfg.alpha;
        if (best_trace) best_trace->push_back(best_obj);
    }

    if (best_obj == inf) throw PlacementFailure("no feasible sequence found", 0);
    return best_sol;
}

}  // namespace gradnest::teacher
