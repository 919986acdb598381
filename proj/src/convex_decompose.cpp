#include <algorithm>
#include <cmath>
#include <list>
#include <map>
#include <utility>

#include "gradnest/geometry.hpp"

namespace gradnest::geom {

namespace {

using IndexPoly = std::vector<int>;  // vertex indices, CCW

double tri_cross(const Vec2& a, const Vec2& b, const Vec2& c) {
    return cross(b - a, c - a);
}

bool strictly_inside_triangle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p, double eps) {
    return tri_cross(a, b, p) > eps && tri_cross(b, c, p) > eps && tri_cross(c, a, p) > eps;
}

// Ear clipping into triangles. O(n^2), fine for contour sizes here.
std::vector<IndexPoly> triangulate(const std::vector<Vec2>& pts, double eps) {
    std::vector<int> ring(pts.size());
    for (std::size_t i = 0; i < ring.size(); ++i) ring[i] = static_cast<int>(i);

    auto find_ear = [&](double inside_eps) -> std::size_t {
        const std::size_t n = ring.size();
        for (std::size_t i = 0; i < n; ++i) {
            const int ip = ring[(i + n - 1) % n];
            const int ic = ring[i];
            const int in = ring[(i + 1) % n];
            if (tri_cross(pts[ip], pts[ic], pts[in]) <= eps) continue;  // reflex or flat
            bool blocked = false;
            for (std::size_t j = 0; j < n; ++j) {
                const int iv = ring[j];
                if (iv == ip || iv == ic || iv == in) continue;
                if (strictly_inside_triangle(pts[ip], pts[ic], pts[in], pts[iv], inside_eps)) {
                    blocked = true;
                    break;
                }
            }
            if (!blocked) return i;
        }
        return n;
    };

    std::vector<IndexPoly> tris;
    while (ring.size() > 3) {
        // Boundary-touching vertices block an ear first; if that leaves no
        // ear (vertex exactly on a diagonal), retry requiring strict interior.
        std::size_t i = find_ear(-eps);
        if (i == ring.size()) i = find_ear(eps);
        if (i == ring.size()) throw GeometryError("triangulation failed (no ear found)");
        const std::size_t n = ring.size();
        tris.push_back({ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]});
        ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(i));
    }
    tris.push_back({ring[0], ring[1], ring[2]});
    return tris;
}

bool convex_at(const std::vector<Vec2>& pts, const IndexPoly& poly, std::size_t i, double eps) {
    const std::size_t n = poly.size();
    const Vec2& a = pts[poly[(i + n - 1) % n]];
    const Vec2& b = pts[poly[i]];
    const Vec2& c = pts[poly[(i + 1) % n]];
    return tri_cross(a, b, c) >= -eps;
}

// Hertel-Mehlhorn: greedily remove inessential diagonals from the
// triangulation. A diagonal is removable when the merged polygon stays
// convex at both junction vertices.
std::vector<IndexPoly> merge_pieces(const std::vector<Vec2>& pts, std::vector<IndexPoly> pieces, double eps) {
    bool merged_any = true;
    while (merged_any) {
        merged_any = false;
        for (std::size_t pi = 0; pi < pieces.size() && !merged_any; ++pi) {
            IndexPoly& p = pieces[pi];
            const std::size_t np = p.size();
            for (std::size_t ei = 0; ei < np && !merged_any; ++ei) {
                const int u = p[ei];
                const int v = p[(ei + 1) % np];
                for (std::size_t qi = 0; qi < pieces.size(); ++qi) {
                    if (qi == pi) continue;
                    IndexPoly& q = pieces[qi];
                    const std::size_t nq = q.size();
                    // Find the shared edge v->u in q.
                    std::size_t fj = nq;
                    for (std::size_t j = 0; j < nq; ++j)
                        if (q[j] == v && q[(j + 1) % nq] == u) {
                            fj = j;
                            break;
                        }
                    if (fj == nq) continue;

                    // Merged polygon: p up to u, then q's chain after u back to v.
                    IndexPoly m;
                    m.reserve(np + nq - 2);
                    for (std::size_t k = 0; k < np; ++k) m.push_back(p[(ei + 1 + k) % np]);  // v ... u
                    for (std::size_t k = 2; k < nq; ++k) m.push_back(q[(fj + k) % nq]);      // after u ... before v
                    // Junction vertices are u (at index np-1) and v (at 0).
                    if (!convex_at(pts, m, np - 1, eps) || !convex_at(pts, m, 0, eps)) continue;

                    pieces[pi] = std::move(m);
                    pieces.erase(pieces.begin() + static_cast<std::ptrdiff_t>(qi));
                    merged_any = true;
                    break;
                }
            }
        }
    }
    return pieces;
}

}  // namespace

std::vector<ConvexPiece> convex_decompose(const Polygon& poly) {
    validate_polygon(poly);

    if (is_convex(poly.vertices)) {
        return {ConvexPiece{poly.vertices, poly.id}};
    }

    // Strip exactly collinear vertices; keeps area and boundary unchanged.
    Vec2 lo, hi;
    bounding_box(poly.vertices, lo, hi);
    const double span = std::max({hi.x - lo.x, hi.y - lo.y, 1e-12});
    const double eps = 1e-12 * span * span;

    std::vector<Vec2> pts;
    pts.reserve(poly.vertices.size());
    const std::size_t n = poly.vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& prev = poly.vertices[(i + n - 1) % n];
        const Vec2& cur = poly.vertices[i];
        const Vec2& next = poly.vertices[(i + 1) % n];
        if (std::abs(tri_cross(prev, cur, next)) <= eps) continue;
        pts.push_back(cur);
    }
    if (pts.size() < 3) throw GeometryError("polygon degenerates to a segment");

    auto pieces = merge_pieces(pts, triangulate(pts, eps), eps);

    std::vector<ConvexPiece> out;
    out.reserve(pieces.size());
    double total = 0.0;
    for (const IndexPoly& ip : pieces) {
        ConvexPiece piece;
        piece.parent = poly.id;
        piece.vertices.reserve(ip.size());
        for (int idx : ip) piece.vertices.push_back(pts[static_cast<std::size_t>(idx)]);
        total += signed_area(piece.vertices);
        out.push_back(std::move(piece));
    }

    const double want = signed_area(poly.vertices);
    if (std::abs(total - want) > 1e-6 * std::abs(want))
        throw GeometryError("convex decomposition lost area");
    return out;
}

}  // namespace gradnest::geom
