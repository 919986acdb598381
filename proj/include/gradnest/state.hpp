#pragma once

#include <cstddef>
#include <vector>

namespace gradnest {

// Per-polygon translations in normalized units (raw model units * 1/2000),
// flattened (x0, y0, x1, y1, ...). The variable that gets diffused and
// refined.
struct SolutionState {
    std::vector<double> v;

    std::size_t items() const { return v.size() / 2; }
    double x(std::size_t i) const { return v[2 * i]; }
    double y(std::size_t i) const { return v[2 * i + 1]; }
};

inline constexpr double kCoordScale = 1.0 / 2000.0;

}  // namespace gradnest
