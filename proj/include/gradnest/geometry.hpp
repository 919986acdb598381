#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gradnest::geom {

struct Vec2 {
    double x{0.0};
    double y{0.0};

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }
};

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::sqrt(a.x * a.x + a.y * a.y); }
inline double norm2(const Vec2& a) { return a.x * a.x + a.y * a.y; }

// Per-polygon translation; the variable being packed, diffused and refined.
struct Placement {
    double x{0.0};
    double y{0.0};

    Vec2 vec() const { return {x, y}; }
};

// Simple closed contour, counter-clockwise, signed area > 0.
struct Polygon {
    std::vector<Vec2> vertices;
    int id{-1};
};

// Convex fragment of a decomposed polygon. Vertices counter-clockwise.
struct ConvexPiece {
    std::vector<Vec2> vertices;
    int parent{-1};
};

// Rectangle [0,width]x[0,height] or horizontal strip [0,inf)x[0,height].
struct Container {
    enum class Kind { strip, rectangle };

    Kind kind{Kind::strip};
    double height{0.0};
    double width{std::numeric_limits<double>::infinity()};  // ignored for strips

    static Container strip(double height) { return {Kind::strip, height, std::numeric_limits<double>::infinity()}; }
    static Container rect(double width, double height) { return {Kind::rectangle, height, width}; }
};

struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tolerances shared across the engine. The inputs never define numeric
// feasibility, so these are pinned here once.
inline constexpr double kContainTol = 1e-9;
inline constexpr double kOverlapRelTol = 1e-6;  // of min(area_a, area_b), per pair

double signed_area(std::span<const Vec2> vertices);
double perimeter(std::span<const Vec2> vertices);
Vec2 centroid(const Polygon& poly);
double diameter(const Polygon& poly);
void bounding_box(std::span<const Vec2> vertices, Vec2& lo, Vec2& hi);
bool is_convex(std::span<const Vec2> vertices);
bool is_simple(std::span<const Vec2> vertices);

// Throws GeometryError unless the polygon satisfies every invariant:
// >= 3 vertices, simple, positive signed area, no coincident neighbours.
void validate_polygon(const Polygon& poly);

Polygon translated(const Polygon& poly, const Placement& at);

// n points at uniform arc-length spacing along the boundary, starting at
// vertex 0 and preserving traversal order.
std::vector<Vec2> resample_contour(const Polygon& poly, std::size_t n);

// Convex partition: pieces pairwise interior-disjoint, union area equal to
// the input area (1e-6 relative). Convex input comes back as one piece.
std::vector<ConvexPiece> convex_decompose(const Polygon& poly);

// Euclidean separation between two placed polygons; exactly 0.0 when they
// touch or overlap. Minimum GJK distance over convex-piece pairs.
double distance(const Polygon& a, const Placement& pa, const Polygon& b, const Placement& pb);
double distance(std::span<const ConvexPiece> a, const Vec2& ta,
                std::span<const ConvexPiece> b, const Vec2& tb);

// Area of the intersection of two placed polygons (sum of pairwise
// convex-piece clip areas).
double overlap_area(const Polygon& a, const Placement& pa, const Polygon& b, const Placement& pb);
double overlap_area(std::span<const ConvexPiece> a, const Vec2& ta,
                    std::span<const ConvexPiece> b, const Vec2& tb);

// Closed containment with kContainTol slack on boundary contact.
bool contains(const Container& container, const Polygon& poly, const Placement& at);

// GJK distance between two convex point sets (internal building block,
// exposed for tests).
double gjk_distance(std::span<const Vec2> a, const Vec2& ta, std::span<const Vec2> b, const Vec2& tb);

// Area of the intersection of two convex CCW polygons.
double convex_overlap_area(std::span<const Vec2> a, const Vec2& ta, std::span<const Vec2> b, const Vec2& tb);

// Minkowski sum of two convex CCW polygons.
std::vector<Vec2> minkowski_sum(std::span<const Vec2> a, std::span<const Vec2> b);

// Outer boundary plus holes; outer CCW, holes CW.
struct RegionPolygon {
    std::vector<Vec2> outer;
    std::vector<std::vector<Vec2>> holes;
};

// No-fit polygon of `orbiting` around `fixed`: reference-point placements of
// the orbiting polygon where the two interiors intersect. Union over
// convex-piece pairs of fixed_piece (+) (-orbiting_piece).
std::vector<RegionPolygon> nfp(const Polygon& fixed, const Polygon& orbiting);

// Raw convex NFP pieces before the union; what the placement search walks.
std::vector<ConvexPiece> nfp_pieces(std::span<const ConvexPiece> fixed,
                                    std::span<const ConvexPiece> orbiting);

enum class PointSide { outside, boundary, inside };

PointSide classify_point(const std::vector<RegionPolygon>& region, const Vec2& p, double tol = 1e-9);

// Pair feasibility as used everywhere: overlap no larger than
// kOverlapRelTol * min(area_a, area_b).
double pair_overlap_tolerance(double area_a, double area_b);

}  // namespace gradnest::geom
