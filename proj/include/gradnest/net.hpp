#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gradnest/geometry.hpp"
#include "gradnest/instance.hpp"
#include "gradnest/rng.hpp"
#include "gradnest/schedule.hpp"
#include "gradnest/state.hpp"

namespace gradnest::net {

struct Tensor {
    std::vector<double> v;
    std::vector<int> shape;

    static Tensor zeros(std::vector<int> shape);
    int size() const { return static_cast<int>(v.size()); }
    double* data() { return v.data(); }
    const double* data() const { return v.data(); }
};

// Named parameter blocks; std::map keeps iteration (and reductions)
// deterministic.
using Params = std::map<std::string, Tensor>;

Params zeros_like(const Params& p);
void axpy(Params& acc, const Params& other, double scale = 1.0);

struct NetConfig {
    int points{256};                      // contour samples per polygon
    std::array<int, 3> sa_width{16, 32, 64};
    std::array<int, 3> sa_k{16, 16, 8};   // group sizes per set-abstraction stage
    int fg_dim{128};
    int fp_dim{16};
    int fc_dim{16};
    int ft_freqs{4};
    int ft_dim{8};
    int msg_hidden{48};
    int msg_dim{48};
    int pos_dim{16};
    int head_hidden{32};
    double d0{200.0};                     // local-edge threshold, raw units
    bool aggregate_mean{true};            // false couples the fields by summing
    std::array<bool, 3> layer_mask{true, true, true};  // global, local, intersection

    int node_dim() const { return fg_dim + fp_dim + fc_dim + ft_dim; }

    // 64-point input with all widths quartered; used by the gradient checks.
    static NetConfig reduced();
};

struct RelationalGraphs {
    std::vector<std::pair<int, int>> global_edges;        // (receiver, sender), i != j
    std::vector<std::pair<int, int>> local_edges;         // distance < d0
    std::vector<std::pair<int, int>> intersection_edges;  // overlap_area > 0
};

// Per-polygon 2-vectors, flattened to 2n, for each relational layer and
// their aggregate.
struct GradientField {
    std::vector<double> global_field;
    std::vector<double> local_field;
    std::vector<double> intersection_field;
    std::vector<double> aggregate;
};

// Conditional score model over polygon placements: multi-scale contour
// encoder, position/constraint/time encoders, and three relational
// edge-convolution layers (global / local / intersection) with 2-wide heads.
class ScoreNet {
public:
    ScoreNet(NetConfig cfg, std::span<const geom::Polygon> shapes, NoiseSchedule schedule = {});

    const NetConfig& config() const { return cfg_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    std::size_t shape_count() const { return shapes_.size(); }

    Params init_params(Rng& rng) const;

    // Geometry-encoder activations for one shape; reusable across every
    // forward pass that shares the same parameters.
    struct GeoOut {
        int shape_id{-1};
        struct Stage {
            std::vector<double> h0, h1;  // per center x neighbour activations
            std::vector<int> arg;        // winning neighbour per center x channel
            std::vector<double> feat;    // per-center features after max
        };
        std::array<Stage, 3> stages;
        std::vector<double> pooled;
        std::vector<int> pool_arg;
        std::vector<double> head_h;
        std::vector<double> fg;
    };

    GeoOut encode_shape(const Params& p, int shape_id) const;
    void encode_shape_backward(const Params& p, const GeoOut& out, std::span<const double> dfg,
                               Params& grads) const;

    using GeoCache = std::unordered_map<int, GeoOut>;

    // Relational forward tape (everything downstream of f_g).
    struct Tape {
        bool valid{false};
        std::vector<int> shape_ids;  // per item
        double t{0.0};
        double sigma{1.0};
        std::vector<double> pos;           // normalized positions, n x 2
        std::vector<double> fp_h0, fp;     // position encoder
        std::vector<double> fc_in, fc_h0, fc;
        std::vector<double> ft_in, ft;
        std::vector<double> node;          // n x D
        RelationalGraphs graphs;
        struct Layer {
            std::vector<std::pair<int, int>> edges;
            std::vector<double> m0, m1, p0, p1;
            std::vector<int> arg_m, arg_p;  // winner edge per node x channel, -1 isolated
            std::vector<double> agg;        // n x (M+P)
            std::vector<double> h;          // n x HH
            std::vector<double> raw;        // n x 2 (before the 1/sigma output scale)
        };
        std::array<Layer, 3> layers;
    };

    GradientField forward(const Params& p, const PackingInstance& inst, const SolutionState& s,
                          double t, const GeoCache& geo, Tape* tape = nullptr) const;

    // Convenience path that encodes the instance's shapes on the fly.
    GradientField forward(const Params& p, const PackingInstance& inst, const SolutionState& s,
                          double t) const;

    // Accumulates parameter gradients for everything behind the tape; the
    // geometry encoder's upstream gradients land in `dfg` (per shape id, to
    // be flushed with encode_shape_backward once per distinct shape).
    void backward(const Params& p, const Tape& tape, const GradientField& upstream, Params& grads,
                  std::unordered_map<int, std::vector<double>>& dfg) const;

    RelationalGraphs build_graphs(const PackingInstance& inst, const SolutionState& s) const;

    // Raw-unit placements for an instance item.
    geom::Placement raw_placement(const SolutionState& s, std::size_t item) const;

private:
    struct ShapeData {
        std::array<std::vector<double>, 3> rel;  // centers x k x 2 relative coords
        std::array<std::vector<int>, 3> nbr;     // neighbour index into the stage input
        std::array<int, 3> centers{};
        std::array<int, 3> k{};
        std::vector<geom::ConvexPiece> pieces;   // raw units, for graph building
        double area{0.0};
    };

    void edge_messages(const Params& p, const std::string& prefix, const Tape& tape,
                       Tape::Layer& layer, int n) const;

    NetConfig cfg_;
    NoiseSchedule schedule_;
    std::vector<geom::Polygon> shapes_;
    std::vector<ShapeData> data_;
};

// Constraint encoder inputs: [is_strip, is_rect, height, width] with
// normalized dimensions; unbounded strip width becomes a large sentinel.
std::array<double, 4> constraint_features(const geom::Container& c);

std::vector<double> time_features(double t, int freqs);

}  // namespace gradnest::net
