#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gradnest/instance.hpp"
#include "gradnest/rng.hpp"
#include "gradnest/teacher.hpp"

namespace gradnest::data {

enum class Family { convex, concave, star, rectilinear };

const char* family_name(Family f);
Family family_from_name(const std::string& name);

// Synthetic stand-in for an industrial shape library. Polygon ids equal
// their pool index; every polygon is centred on its centroid.
struct PolygonPool {
    std::vector<geom::Polygon> polygons;
    std::vector<Family> tags;
};

struct PoolConfig {
    int convex{20};
    int concave{20};
    int star{20};
    int rectilinear{20};
    double diameter_min{80.0};
    double diameter_max{640.0};
};

PolygonPool synth_pool(const PoolConfig& cfg, Rng& rng);

struct ContainerRange {
    geom::Container::Kind kind{geom::Container::Kind::strip};
    double lo{1280.0};
    double hi{1920.0};
};

// n shape ids with replacement plus a container drawn uniformly from the
// range. A draw whose shapes cannot fit retries the container dimensions
// (at most 100 times). `allowed` restricts the id universe (split sampling).
PackingInstance sample_instance(const PolygonPool& pool, int n, const ContainerRange& range, Rng& rng,
                                std::span<const int> allowed = {});

enum class Split { train, test };

struct DatasetRecord {
    PackingInstance instance;
    teacher::TeacherSolution solution;
    Split split{Split::train};
};

struct Dataset {
    PolygonPool pool;
    std::vector<int> train_shape_ids;
    std::vector<int> test_shape_ids;
    std::vector<DatasetRecord> records;
};

struct BuildConfig {
    int train_instances{2000};
    int test_instances{50};
    int n_min{8};
    int n_max{8};
    ContainerRange container;
    teacher::SAConfig sa{250, 0.1, 0.995, 0};
    double train_fraction{0.7};
    std::uint64_t seed{0};
    int jobs{0};
};

// Shape-level 70/30 split first, then instances sampled per split and
// labelled by the teacher. Instances whose labelling fails are dropped.
Dataset build_dataset(const PolygonPool& pool, const BuildConfig& cfg);

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

void save_pool(const PolygonPool& pool, const std::string& path);
PolygonPool load_pool(const std::string& path);

// Plain polygon records: id, vertex count, then one `x y` per line.
void save_polygons(std::span<const geom::Polygon> polys, const std::string& path);
std::vector<geom::Polygon> load_polygons(const std::string& path);

}  // namespace gradnest::data
