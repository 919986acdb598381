#pragma once

#include <vector>

#include "gradnest/geometry.hpp"

namespace gradnest {

// A packing problem: which pool shapes to place, and where they must fit.
// polygon_ids index into a shape pool and may repeat (sampling with
// replacement); each entry is a distinct item to place.
struct PackingInstance {
    std::vector<int> polygon_ids;
    geom::Container container;
};

}  // namespace gradnest
