#include "gradnest/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace gradnest::geom {

double signed_area(std::span<const Vec2> v) {
    double twice = 0.0;
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p = v[i];
        const Vec2& q = v[(i + 1) % n];
        twice += p.x * q.y - q.x * p.y;
    }
    return 0.5 * twice;
}

double perimeter(std::span<const Vec2> v) {
    double len = 0.0;
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) len += norm(v[(i + 1) % n] - v[i]);
    return len;
}

Vec2 centroid(const Polygon& poly) {
    // Area centroid, not the vertex mean.
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    double a2 = 0.0, cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p = v[i];
        const Vec2& q = v[(i + 1) % n];
        const double w = cross(p, q);
        a2 += w;
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    if (std::abs(a2) < 1e-300) throw GeometryError("centroid of degenerate polygon");
    return {cx / (3.0 * a2), cy / (3.0 * a2)};
}

double diameter(const Polygon& poly) {
    const auto& v = poly.vertices;
    double best = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j) best = std::max(best, norm2(v[j] - v[i]));
    return std::sqrt(best);
}

void bounding_box(std::span<const Vec2> v, Vec2& lo, Vec2& hi) {
    lo = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    hi = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const Vec2& p : v) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
    }
}

bool is_convex(std::span<const Vec2> v) {
    const std::size_t n = v.size();
    if (n < 3) return false;
    Vec2 lo, hi;
    bounding_box(v, lo, hi);
    const double span = std::max({hi.x - lo.x, hi.y - lo.y, 1e-12});
    const double eps = 1e-12 * span * span;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 e1 = v[(i + 1) % n] - v[i];
        const Vec2 e2 = v[(i + 2) % n] - v[(i + 1) % n];
        if (cross(e1, e2) < -eps) return false;
    }
    return true;
}

namespace {

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p, double eps) {
    if (std::abs(cross(b - a, p - a)) > eps) return false;
    return std::min(a.x, b.x) - eps <= p.x && p.x <= std::max(a.x, b.x) + eps &&
           std::min(a.y, b.y) - eps <= p.y && p.y <= std::max(a.y, b.y) + eps;
}

int orientation_sign(const Vec2& a, const Vec2& b, const Vec2& c, double eps) {
    const double v = cross(b - a, c - a);
    if (v > eps) return 1;
    if (v < -eps) return -1;
    return 0;
}

bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d, double eps) {
    const int o1 = orientation_sign(a, b, c, eps);
    const int o2 = orientation_sign(a, b, d, eps);
    const int o3 = orientation_sign(c, d, a, eps);
    const int o4 = orientation_sign(c, d, b, eps);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(a, b, c, eps)) return true;
    if (o2 == 0 && on_segment(a, b, d, eps)) return true;
    if (o3 == 0 && on_segment(c, d, a, eps)) return true;
    if (o4 == 0 && on_segment(c, d, b, eps)) return true;
    return false;
}

}  // namespace

bool is_simple(std::span<const Vec2> v) {
    const std::size_t n = v.size();
    if (n < 3) return false;
    Vec2 lo, hi;
    bounding_box(v, lo, hi);
    const double span = std::max({hi.x - lo.x, hi.y - lo.y, 1e-12});
    const double eps = 1e-12 * span * span;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            // Skip segments sharing an endpoint.
            if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
            if (segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n], eps)) return false;
        }
    }
    return true;
}

void validate_polygon(const Polygon& poly) {
    const auto& v = poly.vertices;
    if (v.size() < 3) throw GeometryError("polygon needs at least 3 vertices");
    for (const Vec2& p : v)
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw GeometryError("non-finite vertex");
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i)
        if (norm(v[(i + 1) % n] - v[i]) <= 1e-9)
            throw GeometryError("coincident consecutive vertices");
    if (signed_area(v) <= 0.0) throw GeometryError("polygon must be counter-clockwise with positive area");
    if (!is_simple(v)) throw GeometryError("polygon is self-intersecting");
}

Polygon translated(const Polygon& poly, const Placement& at) {
    Polygon out = poly;
    for (Vec2& p : out.vertices) p = p + at.vec();
    return out;
}

std::vector<Vec2> resample_contour(const Polygon& poly, std::size_t n) {
    validate_polygon(poly);
    if (n < 3) throw GeometryError("resample_contour needs n >= 3");
    const auto& v = poly.vertices;
    const std::size_t m = v.size();

    std::vector<double> cum(m + 1, 0.0);
    for (std::size_t i = 0; i < m; ++i) cum[i + 1] = cum[i] + norm(v[(i + 1) % m] - v[i]);
    const double total = cum[m];
    if (!(total > 0.0)) throw GeometryError("degenerate perimeter");

    std::vector<Vec2> out;
    out.reserve(n);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double target = total * static_cast<double>(k) / static_cast<double>(n);
        while (seg + 1 < m && cum[seg + 1] < target) ++seg;
        const double seg_len = cum[seg + 1] - cum[seg];
        const double frac = seg_len > 0.0 ? (target - cum[seg]) / seg_len : 0.0;
        const Vec2 a = v[seg];
        const Vec2 b = v[(seg + 1) % m];
        out.push_back({a.x + (b.x - a.x) * frac, a.y + (b.y - a.y) * frac});
    }
    return out;
}

double convex_overlap_area(std::span<const Vec2> a, const Vec2& ta, std::span<const Vec2> b, const Vec2& tb) {
    // Sutherland-Hodgman clip of a against b's half-planes.
    std::vector<Vec2> cur;
    cur.reserve(a.size() + b.size());
    for (const Vec2& p : a) cur.push_back(p + ta);

    std::vector<Vec2> next;
    const std::size_t nb = b.size();
    for (std::size_t i = 0; i < nb && !cur.empty(); ++i) {
        const Vec2 e0 = b[i] + tb;
        const Vec2 e1 = b[(i + 1) % nb] + tb;
        const Vec2 edge = e1 - e0;
        const double elen = norm(edge);
        if (elen <= 0.0) continue;
        const double eps = 1e-9 * elen;  // signed-distance slack of 1e-9 units

        next.clear();
        const std::size_t nc = cur.size();
        for (std::size_t j = 0; j < nc; ++j) {
            const Vec2& p = cur[j];
            const Vec2& q = cur[(j + 1) % nc];
            const double dp = cross(edge, p - e0);
            const double dq = cross(edge, q - e0);
            const bool pin = dp >= -eps;
            const bool qin = dq >= -eps;
            if (pin) next.push_back(p);
            if (pin != qin) {
                const double t = dp / (dp - dq);
                next.push_back({p.x + (q.x - p.x) * t, p.y + (q.y - p.y) * t});
            }
        }
        cur.swap(next);
    }
    if (cur.size() < 3) return 0.0;
    return std::max(0.0, signed_area(cur));
}

double overlap_area(std::span<const ConvexPiece> a, const Vec2& ta,
                    std::span<const ConvexPiece> b, const Vec2& tb) {
    double total = 0.0;
    for (const ConvexPiece& pa : a) {
        Vec2 alo, ahi;
        bounding_box(pa.vertices, alo, ahi);
        alo = alo + ta;
        ahi = ahi + ta;
        for (const ConvexPiece& pb : b) {
            Vec2 blo, bhi;
            bounding_box(pb.vertices, blo, bhi);
            blo = blo + tb;
            bhi = bhi + tb;
            if (alo.x > bhi.x || blo.x > ahi.x || alo.y > bhi.y || blo.y > ahi.y) continue;
            total += convex_overlap_area(pa.vertices, ta, pb.vertices, tb);
        }
    }
    return total;
}

double overlap_area(const Polygon& a, const Placement& pa, const Polygon& b, const Placement& pb) {
    const auto da = convex_decompose(a);
    const auto db = convex_decompose(b);
    return overlap_area(da, pa.vec(), db, pb.vec());
}

double distance(std::span<const ConvexPiece> a, const Vec2& ta,
                std::span<const ConvexPiece> b, const Vec2& tb) {
    double best = std::numeric_limits<double>::infinity();
    for (const ConvexPiece& pa : a) {
        for (const ConvexPiece& pb : b) {
            const double d = gjk_distance(pa.vertices, ta, pb.vertices, tb);
            best = std::min(best, d);
            if (best == 0.0) return 0.0;
        }
    }
    return best;
}

namespace {

// Canonical argument order so distance(a,b) and distance(b,a) run the exact
// same float program.
bool placed_less(const Polygon& a, const Placement& pa, const Polygon& b, const Placement& pb) {
    if (pa.x != pb.x) return pa.x < pb.x;
    if (pa.y != pb.y) return pa.y < pb.y;
    const Vec2& va = a.vertices.front();
    const Vec2& vb = b.vertices.front();
    if (va.x != vb.x) return va.x < vb.x;
    if (va.y != vb.y) return va.y < vb.y;
    return a.id < b.id;
}

}  // namespace

double distance(const Polygon& a, const Placement& pa, const Polygon& b, const Placement& pb) {
    if (placed_less(b, pb, a, pa)) return distance(b, pb, a, pa);
    const auto da = convex_decompose(a);
    const auto db = convex_decompose(b);
    return distance(da, pa.vec(), db, pb.vec());
}

bool contains(const Container& container, const Polygon& poly, const Placement& at) {
    if (container.height <= 0.0) throw GeometryError("container height must be positive");
    const bool rect = container.kind == Container::Kind::rectangle;
    if (rect && !(container.width > 0.0)) throw GeometryError("container width must be positive");
    for (const Vec2& v : poly.vertices) {
        const double x = v.x + at.x;
        const double y = v.y + at.y;
        if (x < -kContainTol || y < -kContainTol || y > container.height + kContainTol) return false;
        if (rect && x > container.width + kContainTol) return false;
    }
    return true;
}

double pair_overlap_tolerance(double area_a, double area_b) {
    return kOverlapRelTol * std::min(area_a, area_b);
}

}  // namespace gradnest::geom
