#include "gradnest/diffusion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>

#include "gradnest/parallel.hpp"

namespace gradnest::diff {

using net::Params;

std::pair<SolutionState, std::vector<double>> perturb(const SolutionState& s0, double t,
                                                      const NoiseSchedule& sched, Rng& rng) {
    const double sigma = sched.sigma(t);
    SolutionState st;
    st.v.resize(s0.v.size());
    std::vector<double> z(s0.v.size());
    for (std::size_t i = 0; i < s0.v.size(); ++i) {
        z[i] = rng.normal();
        st.v[i] = s0.v[i] + sigma * z[i];
    }
    return {std::move(st), std::move(z)};
}

SolutionState state_from_solution(const teacher::TeacherSolution& sol) {
    SolutionState s;
    s.v.reserve(2 * sol.placements.size());
    for (const auto& p : sol.placements) {
        s.v.push_back(p.x * kCoordScale);
        s.v.push_back(p.y * kCoordScale);
    }
    return s;
}

namespace {

struct SampleGrad {
    double loss{0.0};
    std::array<double, 4> head_loss{};
};

}  // namespace

double dsm_head_loss(std::span<const double> field, std::span<const double> s0,
                     std::span<const double> st, double t, const NoiseSchedule& sched) {
    const double sigma = sched.sigma(t);
    const double lambda = sigma * sigma;
    double acc = 0.0;
    for (std::size_t d = 0; d < field.size(); ++d) {
        const double diff = field[d] - (s0[d] - st[d]) / (sigma * sigma);
        acc += diff * diff;
    }
    return lambda * acc;
}

DsmResult dsm_loss(const net::ScoreNet& net, const Params& params,
                   std::span<const data::DatasetRecord* const> batch, std::uint64_t seed,
                   std::uint64_t stream, int jobs) {
    const NoiseSchedule& sched = net.schedule();
    const auto& mask = net.config().layer_mask;
    const std::size_t B = batch.size();
    if (B == 0) throw std::invalid_argument("dsm_loss: empty batch");

    // distinct shapes across the batch, encoded once
    std::vector<int> distinct;
    for (const auto* rec : batch)
        for (int id : rec->instance.polygon_ids) distinct.push_back(id);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    net::ScoreNet::GeoCache geo;
    std::mutex geo_mu;
    parallel_for(static_cast<int>(distinct.size()), jobs, [&](int k) {
        auto enc = net.encode_shape(params, distinct[static_cast<std::size_t>(k)]);
        std::lock_guard lock(geo_mu);
        geo.emplace(distinct[static_cast<std::size_t>(k)], std::move(enc));
    });

    const int threads = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
    const int nt = std::max(1, std::min<int>(threads, static_cast<int>(B)));
    std::vector<Params> tgrads(static_cast<std::size_t>(nt));
    std::vector<std::unordered_map<int, std::vector<double>>> tdfg(static_cast<std::size_t>(nt));
    for (auto& g : tgrads) g = net::zeros_like(params);
    std::vector<SampleGrad> samples(B);

    const int chunk = (static_cast<int>(B) + nt - 1) / nt;
    parallel_for(nt, nt, [&](int tid) {
        Params& grads = tgrads[static_cast<std::size_t>(tid)];
        auto& dfg = tdfg[static_cast<std::size_t>(tid)];
        net::ScoreNet::Tape tape;
        const int lo = tid * chunk;
        const int hi = std::min<int>(static_cast<int>(B), lo + chunk);
        for (int bi = lo; bi < hi; ++bi) {
            const auto& rec = *batch[static_cast<std::size_t>(bi)];
            Rng rng(seed, stream + static_cast<std::uint64_t>(bi));
            const double t = rng.uniform(sched.epsilon, 1.0);
            const double sigma = sched.sigma(t);
            const double lambda = sigma * sigma;
            const SolutionState s0 = state_from_solution(rec.solution);
            auto [st, z] = perturb(s0, t, sched, rng);
            (void)z;

            const auto field = net.forward(params, rec.instance, st, t, geo, &tape);
            const std::size_t dim = s0.v.size();

            net::GradientField upstream;
            upstream.global_field.assign(dim, 0.0);
            upstream.local_field.assign(dim, 0.0);
            upstream.intersection_field.assign(dim, 0.0);
            upstream.aggregate.assign(dim, 0.0);
            const std::vector<double>* fields[4] = {&field.global_field, &field.local_field,
                                                    &field.intersection_field, &field.aggregate};
            std::vector<double>* ups[4] = {&upstream.global_field, &upstream.local_field,
                                           &upstream.intersection_field, &upstream.aggregate};
            SampleGrad& out = samples[static_cast<std::size_t>(bi)];
            const double inv_b = 1.0 / static_cast<double>(B);
            for (int h = 0; h < 4; ++h) {
                const bool enabled = h == 3 || mask[static_cast<std::size_t>(h)];
                if (!enabled) continue;
                for (std::size_t d = 0; d < dim; ++d) {
                    const double diff = (*fields[h])[d] - (s0.v[d] - st.v[d]) / (sigma * sigma);
                    (*ups[h])[d] = 2.0 * lambda * diff * inv_b;
                }
                const double lh = dsm_head_loss(*fields[h], s0.v, st.v, t, sched);
                out.head_loss[static_cast<std::size_t>(h)] = lh;
                out.loss += lh;
            }
            net.backward(params, tape, upstream, grads, dfg);
        }
    });

    DsmResult result;
    result.grads = std::move(tgrads[0]);
    for (int tid = 1; tid < nt; ++tid) net::axpy(result.grads, tgrads[static_cast<std::size_t>(tid)]);

    // merge per-shape f_g gradients in id order, then run the encoder backward
    std::unordered_map<int, std::vector<double>> dfg_all;
    for (int tid = 0; tid < nt; ++tid) {
        for (auto& [id, vec] : tdfg[static_cast<std::size_t>(tid)]) {
            auto& acc = dfg_all[id];
            if (acc.empty()) acc.assign(vec.size(), 0.0);
            for (std::size_t i = 0; i < vec.size(); ++i) acc[i] += vec[i];
        }
    }
    std::vector<Params> geo_grads(static_cast<std::size_t>(nt));
    for (int tid = 1; tid < nt; ++tid) geo_grads[static_cast<std::size_t>(tid)] = net::zeros_like(params);
    const int shape_chunk = (static_cast<int>(distinct.size()) + nt - 1) / nt;
    parallel_for(nt, nt, [&](int tid) {
        Params& sink = tid == 0 ? result.grads : geo_grads[static_cast<std::size_t>(tid)];
        const int lo = tid * shape_chunk;
        const int hi = std::min<int>(static_cast<int>(distinct.size()), lo + shape_chunk);
        for (int k = lo; k < hi; ++k) {
            const int id = distinct[static_cast<std::size_t>(k)];
            const auto it = dfg_all.find(id);
            if (it == dfg_all.end()) continue;
            net.encode_shape_backward(params, geo.at(id), it->second, sink);
        }
    });
    for (int tid = 1; tid < nt; ++tid) net::axpy(result.grads, geo_grads[static_cast<std::size_t>(tid)]);

    for (const auto& s : samples) {
        result.loss += s.loss / static_cast<double>(B);
        for (int h = 0; h < 4; ++h)
            result.head_loss[static_cast<std::size_t>(h)] += s.head_loss[static_cast<std::size_t>(h)] /
                                                             static_cast<double>(B);
    }
    return result;
}

TrainResult train(const net::ScoreNet& net, const data::Dataset& ds, const TrainConfig& cfg,
                  const std::string& resume) {
    std::vector<const data::DatasetRecord*> train_recs;
    for (const auto& rec : ds.records)
        if (rec.split == data::Split::train) train_recs.push_back(&rec);
    if (train_recs.empty()) throw std::invalid_argument("train: dataset has no train records");

    Params params;
    net::TrainerState ts;
    int start_step = 0;
    if (!resume.empty()) {
        auto ckpt = net::load_checkpoint(resume);
        params = std::move(ckpt.params);
        if (!ckpt.trainer) throw std::runtime_error("checkpoint has no trainer state to resume from");
        ts = std::move(*ckpt.trainer);
        start_step = static_cast<int>(ts.step);
    } else {
        Rng init_rng(cfg.seed, 0x7a11);
        params = net.init_params(init_rng);
        ts.m = net::zeros_like(params);
        ts.v = net::zeros_like(params);
        ts.step = 0;
    }

    const bool to_disk = !cfg.out_dir.empty();
    if (to_disk) std::filesystem::create_directories(cfg.out_dir);
    std::ofstream log;
    if (to_disk) {
        log.open(cfg.out_dir + "/train_log.txt", start_step == 0 ? std::ios::trunc : std::ios::app);
        if (!log) throw std::runtime_error(cfg.out_dir + ": cannot write training log");
    }

    TrainResult result;
    const auto t0 = std::chrono::steady_clock::now();
    for (int step = start_step; step < cfg.steps; ++step) {
        // stateless batch selection: resuming reproduces the same batches
        Rng pick(cfg.seed, 0x8000u + static_cast<std::uint64_t>(step));
        std::vector<const data::DatasetRecord*> batch;
        batch.reserve(static_cast<std::size_t>(cfg.batch));
        for (int b = 0; b < cfg.batch; ++b)
            batch.push_back(train_recs[static_cast<std::size_t>(pick.below(train_recs.size()))]);

        const std::uint64_t stream = 0x90000000u + static_cast<std::uint64_t>(step) *
                                                       static_cast<std::uint64_t>(cfg.batch);
        auto res = dsm_loss(net, params, batch, cfg.seed, stream, cfg.jobs);
        if (!std::isfinite(res.loss))
            throw std::runtime_error("training diverged: loss is not finite at step " +
                                     std::to_string(step));

        // Adam
        ts.step = static_cast<std::uint64_t>(step) + 1;
        const double b1t = 1.0 - std::pow(cfg.beta1, static_cast<double>(ts.step));
        const double b2t = 1.0 - std::pow(cfg.beta2, static_cast<double>(ts.step));
        for (auto& [name, w] : params) {
            auto& g = res.grads.at(name).v;
            auto& m = ts.m.at(name).v;
            auto& v = ts.v.at(name).v;
            for (std::size_t i = 0; i < w.v.size(); ++i) {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                const double mh = m[i] / b1t;
                const double vh = v[i] / b2t;
                w.v[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.adam_eps);
            }
        }

        result.loss_curve.emplace_back(step, res.loss);
        const auto now = std::chrono::steady_clock::now();
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now - t0).count();
        if (to_disk && (step % cfg.log_every == 0 || step + 1 == cfg.steps))
            log << step << ", " << res.loss << ", " << ms << "\n" << std::flush;
        const int done = step + 1;
        if (to_disk && cfg.checkpoint_every > 0 &&
            (done % cfg.checkpoint_every == 0 || done == cfg.steps)) {
            net::Checkpoint ckpt{net.config(), params, ts};
            net::save_checkpoint(ckpt, cfg.out_dir + "/ckpt_" + std::to_string(done));
        }
    }
    result.params = std::move(params);
    return result;
}

}  // namespace gradnest::diff
