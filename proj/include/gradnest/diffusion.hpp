#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gradnest/checkpoint.hpp"
#include "gradnest/dataset.hpp"
#include "gradnest/net.hpp"
#include "gradnest/schedule.hpp"
#include "gradnest/state.hpp"

namespace gradnest::diff {

// s_t = s0 + sigma(t) * z with z standard normal; z is returned for the
// denoising target.
std::pair<SolutionState, std::vector<double>> perturb(const SolutionState& s0, double t,
                                                      const NoiseSchedule& sched, Rng& rng);

struct TrainConfig {
    int steps{3000};
    int batch{16};
    double lr{1e-4};
    double beta1{0.9};
    double beta2{0.999};
    double adam_eps{1e-8};
    std::uint64_t seed{0};
    int checkpoint_every{1000};
    int log_every{25};
    int jobs{0};
    std::string out_dir;  // empty: no checkpoints or log files
};

struct DsmResult {
    double loss{0.0};                       // mean L_all over the batch
    std::array<double, 4> head_loss{};      // global, local, intersection, aggregate
    net::Params grads;
};

// One head of the DSM objective: lambda(t) * ||field - (s0 - s_t)/sigma^2||^2.
double dsm_head_loss(std::span<const double> field, std::span<const double> s0,
                     std::span<const double> st, double t, const NoiseSchedule& sched);

// One denoising-score-matching evaluation over a batch of teacher records:
// t ~ U(epsilon, 1) per instance, lambda(t) = sigma(t)^2, target
// (s0 - s_t)/sigma^2, loss summed over the three layers plus the aggregate.
DsmResult dsm_loss(const net::ScoreNet& net, const net::Params& params,
                   std::span<const data::DatasetRecord* const> batch, std::uint64_t seed,
                   std::uint64_t stream, int jobs = 1);

SolutionState state_from_solution(const teacher::TeacherSolution& sol);

struct TrainResult {
    net::Params params;
    std::vector<std::pair<int, double>> loss_curve;  // (step, batch loss)
};

// Minibatch Adam over the train split. Checkpoints land in
// cfg.out_dir/ckpt_<step>; the log is `step, loss, wall_ms` lines. A NaN
// loss aborts with a diagnostic. Passing `resume` continues bit-exactly.
TrainResult train(const net::ScoreNet& net, const data::Dataset& ds, const TrainConfig& cfg,
                  const std::string& resume = {});

}  // namespace gradnest::diff
