#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gradnest/dataset.hpp"
#include "gradnest/net.hpp"
#include "gradnest/schedule.hpp"
#include "gradnest/state.hpp"

namespace gradnest::sample {

struct SamplerConfig {
    enum class Mode { rsde, pf_ode };

    Mode mode{Mode::rsde};
    double t0{0.8};
    int steps{64};
    int batch{64};
    std::uint64_t seed{0};
    bool center_start{true};   // shift the initial noise onto the container center
    double util_guess{0.6};    // strip-width estimate used for the center shift
    int jobs{0};
};

// The field provider; the trained network in production, analytic scores in
// tests.
using FieldFn = std::function<std::vector<double>(const SolutionState&, double)>;

// Descending time grid from t0 to epsilon with `steps` uniform intervals.
// The endpoint is exactly epsilon.
std::vector<double> time_grid(double t0, double epsilon, int steps);

// Container center in normalized units; for strips the x-center comes from
// an area-based estimate of the used width.
std::vector<double> container_center(const PackingInstance& inst,
                                     std::span<const geom::Polygon> shapes, double util_guess);

// s(T0) ~ N(center, sigma(T0)^2 I) per coordinate.
SolutionState init_state(const PackingInstance& inst, std::span<const geom::Polygon> shapes,
                         double t0, const NoiseSchedule& sched, Rng& rng, bool center_start = true,
                         double util_guess = 0.6);

// Euler-Maruyama step of the reverse SDE, run backward in time:
// s += 2 sigma sigma_dot field dt + sigma sqrt(2 log(smax/smin) dt) z.
SolutionState rsde_step(const SolutionState& s, double t, double dt, std::span<const double> field,
                        const NoiseSchedule& sched, Rng& rng);

// Probability-flow step: half the reverse-SDE drift, no noise.
SolutionState pf_ode_step(const SolutionState& s, double t, double dt, std::span<const double> field,
                          const NoiseSchedule& sched);

struct Candidate {
    SolutionState state;          // normalized
    teacher::TeacherSolution solution;  // denormalized placements + metrics
    bool finite{true};
    bool overlap_free{false};
    bool contained{false};
    bool feasible{false};
    double total_overlap{0.0};
    double utilization{0.0};
};

struct CandidateSet {
    std::vector<Candidate> candidates;
    int selected{-1};
};

// Index of the selected candidate: feasible ones first by utilization, ties
// by lower overlap then index; otherwise minimal total pairwise overlap.
int select_best(const std::vector<Candidate>& candidates);

// Refines `cfg.batch` candidates independently with the given field and
// keeps the best. Throws when every candidate went non-finite.
CandidateSet generate(const FieldFn& field, const PackingInstance& inst, teacher::ShapeCache& cache,
                      std::span<const geom::Polygon> shapes, const NoiseSchedule& sched,
                      const SamplerConfig& cfg);

// Convenience wrapper around a trained network.
CandidateSet generate(const net::ScoreNet& net, const net::Params& params, const PackingInstance& inst,
                      teacher::ShapeCache& cache, const SamplerConfig& cfg);

}  // namespace gradnest::sample
