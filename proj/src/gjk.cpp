#include <algorithm>
#include <array>
#include <cmath>

#include "gradnest/geometry.hpp"

namespace gradnest::geom {

namespace {

std::size_t support_index(std::span<const Vec2> v, const Vec2& d) {
    std::size_t best = 0;
    double best_dot = dot(v[0], d);
    for (std::size_t i = 1; i < v.size(); ++i) {
        const double s = dot(v[i], d);
        if (s > best_dot) {
            best_dot = s;
            best = i;
        }
    }
    return best;
}

Vec2 closest_on_segment(const Vec2& a, const Vec2& b) {
    // Closest point to the origin on segment ab.
    const Vec2 ab = b - a;
    const double len2 = norm2(ab);
    if (len2 <= 0.0) return a;
    double t = -dot(a, ab) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return a + ab * t;
}

}  // namespace

double gjk_distance(std::span<const Vec2> a, const Vec2& ta, std::span<const Vec2> b, const Vec2& tb) {
    // Distance subalgorithm on the Minkowski difference A - B. The simplex
    // holds at most 3 support points; containment of the origin means the
    // shapes overlap.
    auto support = [&](const Vec2& d) -> Vec2 {
        const Vec2 pa = a[support_index(a, d)] + ta;
        const Vec2 pb = b[support_index(b, {-d.x, -d.y})] + tb;
        return pa - pb;
    };

    std::array<Vec2, 3> w{};
    int nw = 0;

    Vec2 v = (a[0] + ta) - (b[0] + tb);
    if (norm2(v) == 0.0) return 0.0;

    constexpr double kRelTol = 1e-12;
    for (int iter = 0; iter < 128; ++iter) {
        const double v2 = norm2(v);
        if (v2 <= 1e-28) return 0.0;

        const Vec2 s = support({-v.x, -v.y});

        // No progress toward the origin: v is the separation vector.
        if (v2 - dot(v, s) <= kRelTol * v2) return std::sqrt(v2);

        // Repeated support point also means convergence.
        bool seen = false;
        for (int i = 0; i < nw; ++i)
            if (w[i] == s) seen = true;
        if (seen) return std::sqrt(v2);

        w[nw++] = s;

        if (nw == 1) {
            v = w[0];
        } else if (nw == 2) {
            v = closest_on_segment(w[0], w[1]);
            if (norm2(v) <= 1e-28) return 0.0;
            // Drop the vertex not supporting v.
            if (v == w[0]) nw = 1;
            else if (v == w[1]) {
                w[0] = w[1];
                nw = 1;
            }
        } else {
            // Triangle: check origin containment, else keep the closest edge.
            const double d1 = cross(w[1] - w[0], Vec2{} - w[0]);
            const double d2 = cross(w[2] - w[1], Vec2{} - w[1]);
            const double d3 = cross(w[0] - w[2], Vec2{} - w[2]);
            const bool all_nonneg = d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0;
            const bool all_nonpos = d1 <= 0.0 && d2 <= 0.0 && d3 <= 0.0;
            if (all_nonneg || all_nonpos) return 0.0;

            const Vec2 c01 = closest_on_segment(w[0], w[1]);
            const Vec2 c12 = closest_on_segment(w[1], w[2]);
            const Vec2 c02 = closest_on_segment(w[0], w[2]);
            const double n01 = norm2(c01), n12 = norm2(c12), n02 = norm2(c02);
            if (n12 <= n01 && n12 <= n02) {
                w[0] = w[1];
                w[1] = w[2];
                v = c12;
            } else if (n02 <= n01) {
                w[1] = w[2];
                v = c02;
            } else {
                v = c01;
            }
            nw = 2;
            if (norm2(v) <= 1e-28) return 0.0;
            if (v == w[0]) nw = 1;
            else if (v == w[1]) {
                w[0] = w[1];
                nw = 1;
            }
        }
    }
    return std::sqrt(norm2(v));
}

}  // namespace gradnest::geom
