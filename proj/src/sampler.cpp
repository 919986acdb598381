#include "gradnest/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gradnest/parallel.hpp"

namespace gradnest::sample {

using geom::Vec2;

std::vector<double> time_grid(double t0, double epsilon, int steps) {
    if (steps < 1) throw std::invalid_argument("time_grid: steps must be >= 1");
    if (!(t0 > epsilon)) throw std::invalid_argument("time_grid: t0 must exceed epsilon");
    std::vector<double> ts(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k)
        ts[static_cast<std::size_t>(k)] =
            t0 + (epsilon - t0) * static_cast<double>(k) / static_cast<double>(steps);
    ts.back() = epsilon;  // exact endpoint
    return ts;
}

std::vector<double> container_center(const PackingInstance& inst,
                                     std::span<const geom::Polygon> shapes, double util_guess) {
    const auto& c = inst.container;
    double cx;
    if (c.kind == geom::Container::Kind::rectangle) {
        cx = 0.5 * c.width;
    } else {
        double area = 0.0;
        for (int id : inst.polygon_ids)
            area += geom::signed_area(shapes[static_cast<std::size_t>(id)].vertices);
        const double guessed_width = area / (std::max(util_guess, 1e-6) * c.height);
        cx = 0.5 * guessed_width;
    }
    return {cx * kCoordScale, 0.5 * c.height * kCoordScale};
}

SolutionState init_state(const PackingInstance& inst, std::span<const geom::Polygon> shapes,
                         double t0, const NoiseSchedule& sched, Rng& rng, bool center_start,
                         double util_guess) {
    const double sigma = sched.sigma(t0);
    std::vector<double> center{0.0, 0.0};
    if (center_start) center = container_center(inst, shapes, util_guess);
    SolutionState s;
    s.v.resize(2 * inst.polygon_ids.size());
    for (std::size_t i = 0; i < s.v.size(); ++i) s.v[i] = center[i % 2] + sigma * rng.normal();
    return s;
}

SolutionState rsde_step(const SolutionState& s, double t, double dt, std::span<const double> field,
                        const NoiseSchedule& sched, Rng& rng) {
    if (!(dt > 0.0)) throw std::invalid_argument("rsde_step: dt must be positive");
    const double sigma = sched.sigma(t);
    const double drift = 2.0 * sigma * sched.sigma_dot(t) * dt;
    const double noise = sigma * std::sqrt(2.0 * sched.log_ratio() * dt);
    SolutionState out;
    out.v.resize(s.v.size());
    for (std::size_t i = 0; i < s.v.size(); ++i)
        out.v[i] = s.v[i] + drift * field[i] + noise * rng.normal();
    return out;
}

SolutionState pf_ode_step(const SolutionState& s, double t, double dt, std::span<const double> field,
                          const NoiseSchedule& sched) {
    if (!(dt > 0.0)) throw std::invalid_argument("pf_ode_step: dt must be positive");
    const double drift = sched.sigma(t) * sched.sigma_dot(t) * dt;
    SolutionState out;
    out.v.resize(s.v.size());
    for (std::size_t i = 0; i < s.v.size(); ++i) out.v[i] = s.v[i] + drift * field[i];
    return out;
}

int select_best(const std::vector<Candidate>& candidates) {
    int best = -1;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Candidate& c = candidates[i];
        if (!c.finite) continue;
        if (best < 0) {
            best = static_cast<int>(i);
            continue;
        }
        const Candidate& b = candidates[static_cast<std::size_t>(best)];
        if (c.feasible != b.feasible) {
            if (c.feasible) best = static_cast<int>(i);
            continue;
        }
        if (c.feasible) {
            if (c.utilization > b.utilization ||
                (c.utilization == b.utilization && c.total_overlap < b.total_overlap))
                best = static_cast<int>(i);
        } else {
            if (c.total_overlap < b.total_overlap) best = static_cast<int>(i);
        }
    }
    return best;
}

namespace {

void evaluate_candidate(Candidate& cand, const PackingInstance& inst, teacher::ShapeCache& cache) {
    const std::size_t n = inst.polygon_ids.size();
    auto& sol = cand.solution;
    sol.placements.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        sol.placements[i] = {cand.state.x(i) / kCoordScale, cand.state.y(i) / kCoordScale};
        if (!std::isfinite(sol.placements[i].x) || !std::isfinite(sol.placements[i].y))
            cand.finite = false;
    }
    if (!cand.finite) {
        cand.overlap_free = cand.contained = cand.feasible = false;
        cand.total_overlap = std::numeric_limits<double>::infinity();
        return;
    }

    cand.overlap_free = true;
    cand.contained = true;
    cand.total_overlap = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int id = inst.polygon_ids[i];
        if (!geom::contains(inst.container, cache.shape(id), sol.placements[i])) cand.contained = false;
        for (std::size_t j = i + 1; j < n; ++j) {
            const int jd = inst.polygon_ids[j];
            const double ov = geom::overlap_area(cache.pieces(id), sol.placements[i].vec(),
                                                 cache.pieces(jd), sol.placements[j].vec());
            cand.total_overlap += ov;
            if (ov > geom::pair_overlap_tolerance(cache.area(id), cache.area(jd)))
                cand.overlap_free = false;
        }
    }
    cand.feasible = cand.overlap_free && cand.contained;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 lo, hi;
        geom::bounding_box(cache.shape(inst.polygon_ids[i]).vertices, lo, hi);
        xmin = std::min(xmin, lo.x + sol.placements[i].x);
        xmax = std::max(xmax, hi.x + sol.placements[i].x);
    }
    sol.used_width = n == 0 ? 0.0 : xmax - xmin;
    sol.utilization = teacher::utilization(sol, inst, cache);
    cand.utilization = sol.utilization;
}

}  // namespace

CandidateSet generate(const FieldFn& field, const PackingInstance& inst, teacher::ShapeCache& cache,
                      std::span<const geom::Polygon> shapes, const NoiseSchedule& sched,
                      const SamplerConfig& cfg) {
    if (cfg.batch < 1 || cfg.steps < 1) throw std::invalid_argument("generate: batch and steps must be >= 1");
    if (!(cfg.t0 >= sched.epsilon && cfg.t0 <= 1.0))
        throw std::invalid_argument("generate: t0 must lie in [epsilon, 1]");

    const auto ts = time_grid(cfg.t0, sched.epsilon, cfg.steps);
    CandidateSet out;
    out.candidates.resize(static_cast<std::size_t>(cfg.batch));

    parallel_for(cfg.batch, cfg.jobs, [&](int ci) {
        Candidate& cand = out.candidates[static_cast<std::size_t>(ci)];
        Rng rng(cfg.seed, 0xc0000000u + static_cast<std::uint64_t>(ci));
        SolutionState s = init_state(inst, shapes, cfg.t0, sched, rng, cfg.center_start, cfg.util_guess);
        bool alive = true;
        for (int k = 0; k < cfg.steps && alive; ++k) {
            const double t = ts[static_cast<std::size_t>(k)];
            const double dt = t - ts[static_cast<std::size_t>(k + 1)];
            std::vector<double> f;
            try {
                f = field(s, t);
            } catch (const std::exception&) {
                alive = false;
                break;
            }
            s = cfg.mode == SamplerConfig::Mode::rsde ? rsde_step(s, t, dt, f, sched, rng)
                                                      : pf_ode_step(s, t, dt, f, sched);
            for (double v : s.v)
                if (!std::isfinite(v)) {
                    alive = false;
                    break;
                }
        }
        cand.state = std::move(s);
        cand.finite = alive;
        evaluate_candidate(cand, inst, cache);
    });

    out.selected = select_best(out.candidates);
    if (out.selected < 0) throw std::runtime_error("generate: every candidate diverged");
    return out;
}

CandidateSet generate(const net::ScoreNet& net, const net::Params& params, const PackingInstance& inst,
                      teacher::ShapeCache& cache, const SamplerConfig& cfg) {
    // geometry encodings are state independent; share them across candidates
    net::ScoreNet::GeoCache geo;
    for (int id : inst.polygon_ids)
        if (!geo.count(id)) geo.emplace(id, net.encode_shape(params, id));

    FieldFn field = [&](const SolutionState& s, double t) {
        return net.forward(params, inst, s, t, geo).aggregate;
    };
    return generate(field, inst, cache, cache.shapes(), net.schedule(), cfg);
}

}  // namespace gradnest::sample
