#include <algorithm>
#include <cmath>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include "gradnest/geometry.hpp"
#include "gradnest/rng.hpp"

namespace bg = boost::geometry;

namespace gradnest::geom {

namespace {

using BPoint = bg::model::d2::point_xy<double>;
using BPoly = bg::model::polygon<BPoint, false, true>;  // CCW, closed
using BMulti = bg::model::multi_polygon<BPoly>;

std::size_t bottommost(std::span<const Vec2> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i].y < v[best].y || (v[i].y == v[best].y && v[i].x < v[best].x)) best = i;
    return best;
}

int angle_half(const Vec2& d) { return (d.y > 0.0 || (d.y == 0.0 && d.x > 0.0)) ? 0 : 1; }

// eA before-or-equal eB in CCW angular order from +x.
bool edge_le(const Vec2& ea, const Vec2& eb) {
    const int ha = angle_half(ea);
    const int hb = angle_half(eb);
    if (ha != hb) return ha < hb;
    return cross(ea, eb) >= 0.0;
}

BPoly to_boost(std::span<const Vec2> v) {
    BPoly p;
    for (const Vec2& q : v) bg::append(p.outer(), BPoint(q.x, q.y));
    bg::correct(p);
    return p;
}

std::vector<RegionPolygon> from_boost(const BMulti& multi) {
    std::vector<RegionPolygon> out;
    out.reserve(multi.size());
    for (const BPoly& bp : multi) {
        RegionPolygon rp;
        const auto& ring = bp.outer();
        for (std::size_t i = 0; i + 1 < ring.size(); ++i) rp.outer.push_back({ring[i].x(), ring[i].y()});
        for (const auto& hole : bp.inners()) {
            std::vector<Vec2> h;
            for (std::size_t i = 0; i + 1 < hole.size(); ++i) h.push_back({hole[i].x(), hole[i].y()});
            rp.holes.push_back(std::move(h));
        }
        out.push_back(std::move(rp));
    }
    return out;
}

BMulti union_pieces(const std::vector<ConvexPiece>& pieces) {
    BMulti acc;
    for (const ConvexPiece& piece : pieces) {
        BMulti next;
        bg::union_(acc, to_boost(piece.vertices), next);
        acc = std::move(next);
    }
    return acc;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = norm2(ab);
    if (len2 <= 0.0) return norm(p - a);
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return norm(p - (a + ab * t));
}

bool point_in_ring(std::span<const Vec2> ring, const Vec2& p) {
    // Crossing number; boundary points are resolved by the caller first.
    bool inside = false;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = ring[i];
        const Vec2& b = ring[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xi = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (p.x < xi) inside = !inside;
        }
    }
    return inside;
}

}  // namespace

std::vector<Vec2> minkowski_sum(std::span<const Vec2> a, std::span<const Vec2> b) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    if (n < 3 || m < 3) throw GeometryError("minkowski_sum expects polygons");
    const std::size_t ia0 = bottommost(a);
    const std::size_t ib0 = bottommost(b);

    std::vector<Vec2> out;
    out.reserve(n + m);
    std::size_t i = 0, j = 0;
    Vec2 cur = a[ia0] + b[ib0];
    while (i < n || j < m) {
        out.push_back(cur);
        const Vec2 ea = a[(ia0 + i + 1) % n] - a[(ia0 + i) % n];
        const Vec2 eb = b[(ib0 + j + 1) % m] - b[(ib0 + j) % m];
        if (j >= m || (i < n && edge_le(ea, eb))) {
            cur = cur + ea;
            ++i;
        } else {
            cur = cur + eb;
            ++j;
        }
    }
    return out;
}

std::vector<ConvexPiece> nfp_pieces(std::span<const ConvexPiece> fixed,
                                    std::span<const ConvexPiece> orbiting) {
    std::vector<ConvexPiece> out;
    out.reserve(fixed.size() * orbiting.size());
    for (const ConvexPiece& f : fixed) {
        for (const ConvexPiece& o : orbiting) {
            std::vector<Vec2> neg(o.vertices.size());
            for (std::size_t k = 0; k < neg.size(); ++k) neg[k] = -o.vertices[k];
            ConvexPiece piece;
            piece.parent = f.parent;
            piece.vertices = minkowski_sum(f.vertices, neg);
            out.push_back(std::move(piece));
        }
    }
    return out;
}

std::vector<RegionPolygon> nfp(const Polygon& fixed, const Polygon& orbiting) {
    const auto df = convex_decompose(fixed);
    const auto d0 = convex_decompose(orbiting);
    auto pieces = nfp_pieces(df, d0);

    BMulti merged = union_pieces(pieces);
    if (!bg::is_valid(merged) || (merged.empty() && !pieces.empty())) {
        // Degenerate union; jitter the piece vertices and retry once.
        Rng rng(0x9f0c5a1bu);
        for (ConvexPiece& p : pieces)
            for (Vec2& v : p.vertices) {
                v.x += rng.uniform(-1e-7, 1e-7);
                v.y += rng.uniform(-1e-7, 1e-7);
            }
        merged = union_pieces(pieces);
        if (!bg::is_valid(merged) || merged.empty())
            throw GeometryError("nfp union is numerically degenerate");
    }
    return from_boost(merged);
}

PointSide classify_point(const std::vector<RegionPolygon>& region, const Vec2& p, double tol) {
    for (const RegionPolygon& rp : region) {
        bool near_boundary = false;
        auto ring_near = [&](std::span<const Vec2> ring) {
            const std::size_t n = ring.size();
            for (std::size_t i = 0; i < n; ++i)
                if (point_segment_distance(p, ring[i], ring[(i + 1) % n]) <= tol) return true;
            return false;
        };
        if (ring_near(rp.outer)) near_boundary = true;
        for (const auto& hole : rp.holes)
            if (ring_near(hole)) near_boundary = true;
        if (near_boundary) return PointSide::boundary;

        if (!point_in_ring(rp.outer, p)) continue;
        bool in_hole = false;
        for (const auto& hole : rp.holes)
            if (point_in_ring(hole, p)) in_hole = true;
        if (!in_hole) return PointSide::inside;
    }
    return PointSide::outside;
}

}  // namespace gradnest::geom
