#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gradnest/dataset.hpp"
#include "gradnest/sampler.hpp"

namespace gradnest::evalr {

struct InstanceMetrics {
    int index{0};
    double best_utilization{0.0};
    bool best_feasible{false};
    int candidates{0};
    int overlap_free{0};
};

struct MetricsReport {
    double utilization{0.0};            // mean selected-best utilization
    double overlap_free_fraction{0.0};  // over all candidates
    double wall_time_sec{0.0};          // measured by the caller, not part of the pure metrics
    std::vector<InstanceMetrics> per_instance;
};

MetricsReport evaluate(std::span<const sample::CandidateSet> results);

// Teacher (or any plain) solutions: one candidate per instance.
MetricsReport evaluate_solutions(std::span<const teacher::TeacherSolution> sols,
                                 std::span<const PackingInstance> instances,
                                 teacher::ShapeCache& cache);

std::string report_to_text(const MetricsReport& r);
std::string report_to_csv(const MetricsReport& r);

// Layout rendering: container outline, filled polygons, utilization label.
void render_svg(const geom::Container& container, std::span<const geom::Polygon> item_shapes,
                std::span<const geom::Placement> placements, double utilization,
                const std::string& path);

void render_record_svg(const data::DatasetRecord& rec, const data::PolygonPool& pool,
                       const std::string& path);

// Aggregate field sampled over a translation sweep of one probe item, all
// other items fixed at `base`.
struct FieldRaster {
    int nx{0}, ny{0};
    std::vector<geom::Vec2> points;   // probe positions, raw units
    std::vector<geom::Vec2> vectors;  // aggregate field per position
};

FieldRaster gradient_field_raster(const net::ScoreNet& net, const net::Params& params,
                                  const PackingInstance& inst, const SolutionState& base,
                                  int probe_item, int nx, int ny, geom::Vec2 lo, geom::Vec2 hi,
                                  double t);

void render_field_svg(const FieldRaster& raster, const geom::Container& container,
                      std::span<const geom::Polygon> item_shapes,
                      std::span<const geom::Placement> placements, int probe_item,
                      const std::string& path);

// Ablation rows evaluated from per-mask checkpoints over the dataset's test
// split. A missing checkpoint file is an error.
struct AblationRow {
    std::string name;
    MetricsReport report;
};

std::vector<AblationRow> ablate(const data::Dataset& ds,
                                std::span<const std::pair<std::string, std::string>> name_and_ckpt,
                                const sample::SamplerConfig& sampler, int max_instances);

std::string ablation_table(std::span<const AblationRow> rows);

}  // namespace gradnest::evalr
