#pragma once

#include <cstdint>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "gradnest/geometry.hpp"
#include "gradnest/instance.hpp"
#include "gradnest/rng.hpp"

namespace gradnest::teacher {

struct SAConfig {
    int iterations{2000};
    double t0_scale{0.1};  // T0 = t0_scale * mean polygon diameter
    double alpha{0.995};
    std::uint64_t seed{0};
};

struct TeacherSolution {
    std::vector<geom::Placement> placements;  // parallel to instance.polygon_ids
    double used_width{0.0};
    double utilization{0.0};
};

// Raised when a rectangle container cannot take the next polygon of a
// sequence. `item` is the position in the insertion order that failed.
struct PlacementFailure : geom::GeometryError {
    PlacementFailure(const std::string& msg, int item_index)
        : geom::GeometryError(msg), item(item_index) {}
    int item;
};

// Convex decompositions and pairwise NFPs for a shape pool, shared across
// BLF runs. NFP lookups are internally synchronized.
class ShapeCache {
public:
    explicit ShapeCache(std::span<const geom::Polygon> pool);

    const geom::Polygon& shape(int id) const { return pool_[static_cast<std::size_t>(id)]; }
    std::span<const geom::Polygon> shapes() const { return pool_; }
    const std::vector<geom::ConvexPiece>& pieces(int id) const;
    const std::vector<geom::ConvexPiece>& nfp(int fixed_id, int orbiting_id);
    double area(int id) const { return areas_[static_cast<std::size_t>(id)]; }
    double shape_diameter(int id) const { return diameters_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return pool_.size(); }

private:
    std::vector<geom::Polygon> pool_;
    std::vector<std::vector<geom::ConvexPiece>> pieces_;
    std::vector<double> areas_;
    std::vector<double> diameters_;
    mutable std::mutex mu_;
    std::unordered_map<std::uint64_t, std::vector<geom::ConvexPiece>> nfps_;
};

// Bottom-left-fill over a fixed insertion order (`order` holds instance item
// indices). Each item goes to the feasible position with minimal x, ties
// broken by minimal y. Throws PlacementFailure when a rectangle container
// cannot take an item.
TeacherSolution blf_place(std::span<const int> order, const PackingInstance& inst, ShapeCache& cache);

// Simulated annealing over insertion order: swap-two neighbourhood,
// geometric cooling, exp(-delta/T) acceptance, best-so-far result.
// `best_trace`, when given, records the best objective after each iteration.
TeacherSolution anneal(const PackingInstance& inst, ShapeCache& cache, const SAConfig& cfg, Rng& rng,
                       std::vector<double>* best_trace = nullptr);

double utilization(const TeacherSolution& sol, const PackingInstance& inst, ShapeCache& cache);

// Strip objective is used width; rectangle objective is the bounding area.
double objective(const TeacherSolution& sol, const PackingInstance& inst, ShapeCache& cache);

bool feasible(const TeacherSolution& sol, const PackingInstance& inst, ShapeCache& cache);

}  // namespace gradnest::teacher
