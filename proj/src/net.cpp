#include "gradnest/net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace gradnest::net {

using geom::Vec2;

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    t.shape = std::move(shape);
    int n = 1;
    for (int d : t.shape) n *= d;
    t.v.assign(static_cast<std::size_t>(n), 0.0);
    return t;
}

Params zeros_like(const Params& p) {
    Params out;
    for (const auto& [name, t] : p) out.emplace(name, Tensor::zeros(t.shape));
    return out;
}

void axpy(Params& acc, const Params& other, double scale) {
    for (auto& [name, t] : acc) {
        const auto it = other.find(name);
        if (it == other.end()) continue;
        const auto& src = it->second.v;
        for (std::size_t i = 0; i < t.v.size(); ++i) t.v[i] += scale * src[i];
    }
}

NetConfig NetConfig::reduced() {
    NetConfig c;
    c.points = 64;
    c.sa_width = {4, 8, 16};
    c.fg_dim = 32;
    c.fp_dim = 4;
    c.fc_dim = 4;
    c.ft_freqs = 2;
    c.ft_dim = 4;
    c.msg_hidden = 12;
    c.msg_dim = 12;
    c.pos_dim = 4;
    c.head_hidden = 8;
    return c;
}

namespace {

// y[o] += W[i][o] x[i] + b[o]; W stored row-major (in, out)
void linear_fwd(const double* x, int in, const Tensor& W, const Tensor& b, double* y) {
    const int out = W.shape[1];
    for (int o = 0; o < out; ++o) y[o] = b.v[static_cast<std::size_t>(o)];
    for (int i = 0; i < in; ++i) {
        const double xi = x[i];
        const double* w = W.data() + static_cast<std::size_t>(i) * out;
        for (int o = 0; o < out; ++o) y[o] += xi * w[o];
    }
}

// accumulate dW, db; optionally dx (+=)
void linear_bwd(const double* x, const double* dy, int in, const Tensor& W, Tensor& dW, Tensor& db,
                double* dx) {
    const int out = W.shape[1];
    for (int o = 0; o < out; ++o) db.v[static_cast<std::size_t>(o)] += dy[o];
    for (int i = 0; i < in; ++i) {
        const double xi = x[i];
        double* dwrow = dW.data() + static_cast<std::size_t>(i) * out;
        const double* wrow = W.data() + static_cast<std::size_t>(i) * out;
        double acc = 0.0;
        for (int o = 0; o < out; ++o) {
            dwrow[o] += xi * dy[o];
            acc += wrow[o] * dy[o];
        }
        if (dx) dx[i] += acc;
    }
}

void tanh_inplace(double* y, int n) {
    for (int i = 0; i < n; ++i) y[i] = std::tanh(y[i]);
}

// dy is consumed: becomes the gradient before the nonlinearity
void tanh_bwd_inplace(const double* y, double* dy, int n) {
    for (int i = 0; i < n; ++i) dy[i] *= 1.0 - y[i] * y[i];
}

std::vector<int> farthest_point_sample(std::span<const Vec2> pts, int m) {
    const int n = static_cast<int>(pts.size());
    std::vector<int> picked;
    picked.reserve(static_cast<std::size_t>(m));
    std::vector<double> dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    int cur = 0;  // anchored at point index 0 for determinism
    for (int s = 0; s < m; ++s) {
        picked.push_back(cur);
        int next = -1;
        double best = -1.0;
        for (int i = 0; i < n; ++i) {
            const double d = geom::norm2(pts[static_cast<std::size_t>(i)] - pts[static_cast<std::size_t>(cur)]);
            if (d < dist[static_cast<std::size_t>(i)]) dist[static_cast<std::size_t>(i)] = d;
            if (dist[static_cast<std::size_t>(i)] > best) {
                best = dist[static_cast<std::size_t>(i)];
                next = i;
            }
        }
        cur = next;
    }
    return picked;
}

std::vector<int> k_nearest(std::span<const Vec2> pts, const Vec2& center, int k) {
    std::vector<int> idx(pts.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        const double da = geom::norm2(pts[static_cast<std::size_t>(a)] - center);
        const double db = geom::norm2(pts[static_cast<std::size_t>(b)] - center);
        if (da != db) return da < db;
        return a < b;
    });
    idx.resize(static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(k), idx.size())));
    return idx;
}

void add_linear(Params& p, const std::string& name, int in, int out, Rng& rng, bool zero_weights) {
    Tensor W = Tensor::zeros({in, out});
    if (!zero_weights) {
        const double a = std::sqrt(6.0 / static_cast<double>(in + out));
        for (auto& w : W.v) w = rng.uniform(-a, a);
    }
    p.emplace(name + ".w", std::move(W));
    p.emplace(name + ".b", Tensor::zeros({out}));
}

const Tensor& P(const Params& p, const std::string& name) {
    const auto it = p.find(name);
    if (it == p.end()) throw std::runtime_error("missing parameter tensor: " + name);
    return it->second;
}

Tensor& G(Params& p, const std::string& name) {
    const auto it = p.find(name);
    if (it == p.end()) throw std::runtime_error("missing gradient tensor: " + name);
    return it->second;
}

constexpr const char* kLayerPrefix[3] = {"glb", "loc", "isc"};

}  // namespace

std::array<double, 4> constraint_features(const geom::Container& c) {
    const bool strip = c.kind == geom::Container::Kind::strip;
    // unbounded strip width: large sentinel, still normalized
    const double w = strip ? 1.0e6 : c.width;
    return {strip ? 1.0 : 0.0, strip ? 0.0 : 1.0, c.height * kCoordScale, w * kCoordScale};
}

std::vector<double> time_features(double t, int freqs) {
    std::vector<double> out(static_cast<std::size_t>(2 * freqs));
    double w = std::numbers::pi;
    for (int m = 0; m < freqs; ++m) {
        out[static_cast<std::size_t>(2 * m)] = std::sin(w * t);
        out[static_cast<std::size_t>(2 * m + 1)] = std::cos(w * t);
        w *= 2.0;
    }
    return out;
}

ScoreNet::ScoreNet(NetConfig cfg, std::span<const geom::Polygon> shapes, NoiseSchedule schedule)
    : cfg_(cfg), schedule_(schedule) {
    shapes_.assign(shapes.begin(), shapes.end());
    data_.resize(shapes_.size());
    for (std::size_t sid = 0; sid < shapes_.size(); ++sid) {
        const geom::Polygon& poly = shapes_[sid];
        ShapeData& sd = data_[sid];
        sd.pieces = geom::convex_decompose(poly);
        sd.area = geom::signed_area(poly.vertices);

        auto raw = geom::resample_contour(poly, static_cast<std::size_t>(cfg_.points));
        const Vec2 c = geom::centroid(poly);
        std::vector<Vec2> pts(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) pts[i] = (raw[i] - c) * kCoordScale;

        std::vector<Vec2> stage_in = std::move(pts);
        for (int s = 0; s < 3; ++s) {
            const int m = std::max(1, static_cast<int>(stage_in.size()) / 4);
            const int k = std::min<int>(cfg_.sa_k[static_cast<std::size_t>(s)],
                                        static_cast<int>(stage_in.size()));
            sd.centers[static_cast<std::size_t>(s)] = m;
            sd.k[static_cast<std::size_t>(s)] = k;
            const auto fps = farthest_point_sample(stage_in, m);
            std::vector<Vec2> next;
            next.reserve(static_cast<std::size_t>(m));
            auto& rel = sd.rel[static_cast<std::size_t>(s)];
            auto& nbr = sd.nbr[static_cast<std::size_t>(s)];
            rel.reserve(static_cast<std::size_t>(m * k * 2));
            nbr.reserve(static_cast<std::size_t>(m * k));
            for (int ci = 0; ci < m; ++ci) {
                const Vec2 center = stage_in[static_cast<std::size_t>(fps[static_cast<std::size_t>(ci)])];
                next.push_back(center);
                for (int j : k_nearest(stage_in, center, k)) {
                    const Vec2 r = stage_in[static_cast<std::size_t>(j)] - center;
                    rel.push_back(r.x);
                    rel.push_back(r.y);
                    nbr.push_back(j);
                }
            }
            stage_in = std::move(next);
        }
    }
}

Params ScoreNet::init_params(Rng& rng) const {
    Params p;
    int prev = 0;
    for (int s = 0; s < 3; ++s) {
        const int w = cfg_.sa_width[static_cast<std::size_t>(s)];
        const std::string base = "geo.sa" + std::to_string(s);
        add_linear(p, base + ".l0", 2 + prev, w, rng, false);
        add_linear(p, base + ".l1", w, w, rng, false);
        prev = w;
    }
    add_linear(p, "geo.head.l0", prev, cfg_.fg_dim, rng, false);
    add_linear(p, "geo.head.l1", cfg_.fg_dim, cfg_.fg_dim, rng, false);

    add_linear(p, "pos.l0", 2, cfg_.fp_dim, rng, false);
    add_linear(p, "pos.l1", cfg_.fp_dim, cfg_.fp_dim, rng, false);
    add_linear(p, "cons.l0", 4, cfg_.fc_dim, rng, false);
    add_linear(p, "cons.l1", cfg_.fc_dim, cfg_.fc_dim, rng, false);
    add_linear(p, "time.l0", 2 * cfg_.ft_freqs, cfg_.ft_dim, rng, false);

    const int D = cfg_.node_dim();
    for (const char* L : kLayerPrefix) {
        const std::string base = L;
        add_linear(p, base + ".msg.l0", 2 * D, cfg_.msg_hidden, rng, false);
        add_linear(p, base + ".msg.l1", cfg_.msg_hidden, cfg_.msg_dim, rng, false);
        add_linear(p, base + ".pos.l0", 2, cfg_.pos_dim, rng, false);
        add_linear(p, base + ".pos.l1", cfg_.pos_dim, cfg_.pos_dim, rng, false);
        add_linear(p, base + ".head.l0", cfg_.msg_dim + cfg_.pos_dim, cfg_.head_hidden, rng, false);
        // zero-initialised output head: the initial field is identically zero
        add_linear(p, base + ".head.l1", cfg_.head_hidden, 2, rng, true);
    }
    return p;
}

ScoreNet::GeoOut ScoreNet::encode_shape(const Params& p, int shape_id) const {
    const ShapeData& sd = data_.at(static_cast<std::size_t>(shape_id));
    GeoOut out;
    out.shape_id = shape_id;

    std::vector<double> prev_feat;  // n_prev x w_prev
    int prev_w = 0;
    for (int s = 0; s < 3; ++s) {
        const int m = sd.centers[static_cast<std::size_t>(s)];
        const int k = sd.k[static_cast<std::size_t>(s)];
        const int w = cfg_.sa_width[static_cast<std::size_t>(s)];
        const int in_dim = 2 + prev_w;
        const Tensor& W0 = P(p, "geo.sa" + std::to_string(s) + ".l0.w");
        const Tensor& b0 = P(p, "geo.sa" + std::to_string(s) + ".l0.b");
        const Tensor& W1 = P(p, "geo.sa" + std::to_string(s) + ".l1.w");
        const Tensor& b1 = P(p, "geo.sa" + std::to_string(s) + ".l1.b");

        auto& st = out.stages[static_cast<std::size_t>(s)];
        st.h0.resize(static_cast<std::size_t>(m * k * w));
        st.h1.resize(static_cast<std::size_t>(m * k * w));
        st.arg.assign(static_cast<std::size_t>(m * w), 0);
        st.feat.assign(static_cast<std::size_t>(m * w), -std::numeric_limits<double>::infinity());

        std::vector<double> in(static_cast<std::size_t>(in_dim));
        for (int ci = 0; ci < m; ++ci) {
            for (int j = 0; j < k; ++j) {
                const std::size_t slot = static_cast<std::size_t>(ci * k + j);
                in[0] = sd.rel[static_cast<std::size_t>(s)][2 * slot];
                in[1] = sd.rel[static_cast<std::size_t>(s)][2 * slot + 1];
                const int src = sd.nbr[static_cast<std::size_t>(s)][slot];
                for (int q = 0; q < prev_w; ++q)
                    in[static_cast<std::size_t>(2 + q)] = prev_feat[static_cast<std::size_t>(src * prev_w + q)];

                double* h0 = st.h0.data() + slot * static_cast<std::size_t>(w);
                double* h1 = st.h1.data() + slot * static_cast<std::size_t>(w);
                linear_fwd(in.data(), in_dim, W0, b0, h0);
                tanh_inplace(h0, w);
                linear_fwd(h0, w, W1, b1, h1);
                tanh_inplace(h1, w);
                for (int ch = 0; ch < w; ++ch) {
                    const std::size_t f = static_cast<std::size_t>(ci * w + ch);
                    if (h1[ch] > st.feat[f]) {
                        st.feat[f] = h1[ch];
                        st.arg[f] = j;
                    }
                }
            }
        }
        prev_feat = st.feat;
        prev_w = w;
    }

    // global max pool over the remaining centers, then the 128-wide head
    const int m3 = sd.centers[2];
    const int w3 = cfg_.sa_width[2];
    out.pooled.assign(static_cast<std::size_t>(w3), -std::numeric_limits<double>::infinity());
    out.pool_arg.assign(static_cast<std::size_t>(w3), 0);
    const auto& feat3 = out.stages[2].feat;
    for (int ci = 0; ci < m3; ++ci)
        for (int ch = 0; ch < w3; ++ch) {
            const double v = feat3[static_cast<std::size_t>(ci * w3 + ch)];
            if (v > out.pooled[static_cast<std::size_t>(ch)]) {
                out.pooled[static_cast<std::size_t>(ch)] = v;
                out.pool_arg[static_cast<std::size_t>(ch)] = ci;
            }
        }

    out.head_h.resize(static_cast<std::size_t>(cfg_.fg_dim));
    out.fg.resize(static_cast<std::size_t>(cfg_.fg_dim));
    linear_fwd(out.pooled.data(), w3, P(p, "geo.head.l0.w"), P(p, "geo.head.l0.b"), out.head_h.data());
    tanh_inplace(out.head_h.data(), cfg_.fg_dim);
    linear_fwd(out.head_h.data(), cfg_.fg_dim, P(p, "geo.head.l1.w"), P(p, "geo.head.l1.b"), out.fg.data());
    return out;
}

void ScoreNet::encode_shape_backward(const Params& p, const GeoOut& out, std::span<const double> dfg,
                                     Params& grads) const {
    const ShapeData& sd = data_.at(static_cast<std::size_t>(out.shape_id));
    const int w3 = cfg_.sa_width[2];

    std::vector<double> d_head_h(static_cast<std::size_t>(cfg_.fg_dim), 0.0);
    linear_bwd(out.head_h.data(), dfg.data(), cfg_.fg_dim, P(p, "geo.head.l1.w"),
               G(grads, "geo.head.l1.w"), G(grads, "geo.head.l1.b"), d_head_h.data());
    tanh_bwd_inplace(out.head_h.data(), d_head_h.data(), cfg_.fg_dim);
    std::vector<double> d_pooled(static_cast<std::size_t>(w3), 0.0);
    linear_bwd(out.pooled.data(), d_head_h.data(), w3, P(p, "geo.head.l0.w"),
               G(grads, "geo.head.l0.w"), G(grads, "geo.head.l0.b"), d_pooled.data());

    // route pooled gradient back to the winning centers
    const int m3 = sd.centers[2];
    std::vector<double> d_feat(static_cast<std::size_t>(m3 * w3), 0.0);
    for (int ch = 0; ch < w3; ++ch)
        d_feat[static_cast<std::size_t>(out.pool_arg[static_cast<std::size_t>(ch)] * w3 + ch)] +=
            d_pooled[static_cast<std::size_t>(ch)];

    for (int s = 2; s >= 0; --s) {
        const int m = sd.centers[static_cast<std::size_t>(s)];
        const int k = sd.k[static_cast<std::size_t>(s)];
        const int w = cfg_.sa_width[static_cast<std::size_t>(s)];
        const int prev_w = s == 0 ? 0 : cfg_.sa_width[static_cast<std::size_t>(s - 1)];
        const int in_dim = 2 + prev_w;
        const auto& st = out.stages[static_cast<std::size_t>(s)];
        const Tensor& W0 = P(p, "geo.sa" + std::to_string(s) + ".l0.w");
        const Tensor& W1 = P(p, "geo.sa" + std::to_string(s) + ".l1.w");
        Tensor& dW0 = G(grads, "geo.sa" + std::to_string(s) + ".l0.w");
        Tensor& db0 = G(grads, "geo.sa" + std::to_string(s) + ".l0.b");
        Tensor& dW1 = G(grads, "geo.sa" + std::to_string(s) + ".l1.w");
        Tensor& db1 = G(grads, "geo.sa" + std::to_string(s) + ".l1.b");

        const int prev_n = s == 0 ? cfg_.points : sd.centers[static_cast<std::size_t>(s - 1)];
        std::vector<double> d_prev(static_cast<std::size_t>(prev_n * prev_w), 0.0);
        const std::vector<double>* prev_feat = s == 0 ? nullptr : &out.stages[static_cast<std::size_t>(s - 1)].feat;

        std::vector<double> dh1(static_cast<std::size_t>(w));
        std::vector<double> dh0(static_cast<std::size_t>(w));
        std::vector<double> din(static_cast<std::size_t>(in_dim));
        std::vector<double> in(static_cast<std::size_t>(in_dim));

        // collect per-slot gradients from the channel winners
        for (int ci = 0; ci < m; ++ci) {
            for (int j = 0; j < k; ++j) {
                const std::size_t slot = static_cast<std::size_t>(ci * k + j);
                bool any = false;
                std::fill(dh1.begin(), dh1.end(), 0.0);
                for (int ch = 0; ch < w; ++ch) {
                    if (st.arg[static_cast<std::size_t>(ci * w + ch)] == j) {
                        const double g = d_feat[static_cast<std::size_t>(ci * w + ch)];
                        if (g != 0.0) any = true;
                        dh1[static_cast<std::size_t>(ch)] = g;
                    }
                }
                if (!any) continue;

                const double* h0 = st.h0.data() + slot * static_cast<std::size_t>(w);
                const double* h1 = st.h1.data() + slot * static_cast<std::size_t>(w);
                in[0] = sd.rel[static_cast<std::size_t>(s)][2 * slot];
                in[1] = sd.rel[static_cast<std::size_t>(s)][2 * slot + 1];
                const int src = sd.nbr[static_cast<std::size_t>(s)][slot];
                for (int q = 0; q < prev_w; ++q)
                    in[static_cast<std::size_t>(2 + q)] = (*prev_feat)[static_cast<std::size_t>(src * prev_w + q)];

                tanh_bwd_inplace(h1, dh1.data(), w);
                std::fill(dh0.begin(), dh0.end(), 0.0);
                linear_bwd(h0, dh1.data(), w, W1, dW1, db1, dh0.data());
                tanh_bwd_inplace(h0, dh0.data(), w);
                std::fill(din.begin(), din.end(), 0.0);
                linear_bwd(in.data(), dh0.data(), in_dim, W0, dW0, db0, din.data());
                for (int q = 0; q < prev_w; ++q)
                    d_prev[static_cast<std::size_t>(src * prev_w + q)] += din[static_cast<std::size_t>(2 + q)];
            }
        }
        d_feat = std::move(d_prev);
    }
}

RelationalGraphs ScoreNet::build_graphs(const PackingInstance& inst, const SolutionState& s) const {
    const std::size_t n = inst.polygon_ids.size();
    if (s.v.size() != 2 * n) throw std::invalid_argument("state size does not match instance");
    for (double v : s.v)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite solution state");

    RelationalGraphs g;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) g.global_edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto& pi = data_[static_cast<std::size_t>(inst.polygon_ids[i])].pieces;
        const Vec2 ti = raw_placement(s, i).vec();
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& pj = data_[static_cast<std::size_t>(inst.polygon_ids[j])].pieces;
            const Vec2 tj = raw_placement(s, j).vec();
            const double d = geom::distance(pi, ti, pj, tj);
            if (d < cfg_.d0) {
                g.local_edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
                g.local_edges.emplace_back(static_cast<int>(j), static_cast<int>(i));
            }
            if (d == 0.0 && geom::overlap_area(pi, ti, pj, tj) > 0.0) {
                g.intersection_edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
                g.intersection_edges.emplace_back(static_cast<int>(j), static_cast<int>(i));
            }
        }
    }
    return g;
}

geom::Placement ScoreNet::raw_placement(const SolutionState& s, std::size_t item) const {
    return {s.x(item) / kCoordScale, s.y(item) / kCoordScale};
}

void ScoreNet::edge_messages(const Params& p, const std::string& prefix, const Tape& tape,
                             Tape::Layer& layer, int n) const {
    const int D = cfg_.node_dim();
    const int H = cfg_.msg_hidden;
    const int M = cfg_.msg_dim;
    const int Pd = cfg_.pos_dim;
    const Tensor& Wm0 = P(p, prefix + ".msg.l0.w");
    const Tensor& bm0 = P(p, prefix + ".msg.l0.b");
    const Tensor& Wm1 = P(p, prefix + ".msg.l1.w");
    const Tensor& bm1 = P(p, prefix + ".msg.l1.b");
    const Tensor& Wp0 = P(p, prefix + ".pos.l0.w");
    const Tensor& bp0 = P(p, prefix + ".pos.l0.b");
    const Tensor& Wp1 = P(p, prefix + ".pos.l1.w");
    const Tensor& bp1 = P(p, prefix + ".pos.l1.b");
    const Tensor& Wh0 = P(p, prefix + ".head.l0.w");
    const Tensor& bh0 = P(p, prefix + ".head.l0.b");
    const Tensor& Wh1 = P(p, prefix + ".head.l1.w");
    const Tensor& bh1 = P(p, prefix + ".head.l1.b");

    const std::size_t E = layer.edges.size();
    layer.m0.resize(E * static_cast<std::size_t>(H));
    layer.m1.resize(E * static_cast<std::size_t>(M));
    layer.p0.resize(E * static_cast<std::size_t>(Pd));
    layer.p1.resize(E * static_cast<std::size_t>(Pd));
    layer.arg_m.assign(static_cast<std::size_t>(n * M), -1);
    layer.arg_p.assign(static_cast<std::size_t>(n * Pd), -1);
    layer.agg.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(M + Pd), 0.0);
    layer.h.resize(static_cast<std::size_t>(n * cfg_.head_hidden));
    layer.raw.resize(static_cast<std::size_t>(n * 2));

    std::vector<double> ein(static_cast<std::size_t>(2 * D));
    std::vector<double> q(2);
    std::vector<double> best_m(static_cast<std::size_t>(n * M), -std::numeric_limits<double>::infinity());
    std::vector<double> best_p(static_cast<std::size_t>(n * Pd), -std::numeric_limits<double>::infinity());

    for (std::size_t e = 0; e < E; ++e) {
        const int i = layer.edges[e].first;
        const int j = layer.edges[e].second;
        const double* ni = tape.node.data() + static_cast<std::size_t>(i) * D;
        const double* nj = tape.node.data() + static_cast<std::size_t>(j) * D;
        for (int d = 0; d < D; ++d) {
            ein[static_cast<std::size_t>(d)] = ni[d];
            ein[static_cast<std::size_t>(D + d)] = ni[d] - nj[d];
        }
        double* m0 = layer.m0.data() + e * static_cast<std::size_t>(H);
        double* m1 = layer.m1.data() + e * static_cast<std::size_t>(M);
        linear_fwd(ein.data(), 2 * D, Wm0, bm0, m0);
        tanh_inplace(m0, H);
        linear_fwd(m0, H, Wm1, bm1, m1);
        tanh_inplace(m1, M);

        q[0] = tape.pos[static_cast<std::size_t>(2 * i)] - tape.pos[static_cast<std::size_t>(2 * j)];
        q[1] = tape.pos[static_cast<std::size_t>(2 * i + 1)] - tape.pos[static_cast<std::size_t>(2 * j + 1)];
        double* p0 = layer.p0.data() + e * static_cast<std::size_t>(Pd);
        double* p1 = layer.p1.data() + e * static_cast<std::size_t>(Pd);
        linear_fwd(q.data(), 2, Wp0, bp0, p0);
        tanh_inplace(p0, Pd);
        linear_fwd(p0, Pd, Wp1, bp1, p1);
        tanh_inplace(p1, Pd);

        for (int ch = 0; ch < M; ++ch) {
            const std::size_t f = static_cast<std::size_t>(i * M + ch);
            if (m1[ch] > best_m[f]) {
                best_m[f] = m1[ch];
                layer.arg_m[f] = static_cast<int>(e);
            }
        }
        for (int ch = 0; ch < Pd; ++ch) {
            const std::size_t f = static_cast<std::size_t>(i * Pd + ch);
            if (p1[ch] > best_p[f]) {
                best_p[f] = p1[ch];
                layer.arg_p[f] = static_cast<int>(e);
            }
        }
    }

    // isolated nodes keep the zero message
    for (int i = 0; i < n; ++i) {
        double* agg = layer.agg.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(M + Pd);
        for (int ch = 0; ch < M; ++ch)
            if (layer.arg_m[static_cast<std::size_t>(i * M + ch)] >= 0)
                agg[ch] = best_m[static_cast<std::size_t>(i * M + ch)];
        for (int ch = 0; ch < Pd; ++ch)
            if (layer.arg_p[static_cast<std::size_t>(i * Pd + ch)] >= 0)
                agg[M + ch] = best_p[static_cast<std::size_t>(i * Pd + ch)];

        double* h = layer.h.data() + static_cast<std::size_t>(i * cfg_.head_hidden);
        linear_fwd(agg, M + Pd, Wh0, bh0, h);
        tanh_inplace(h, cfg_.head_hidden);
        linear_fwd(h, cfg_.head_hidden, Wh1, bh1, layer.raw.data() + static_cast<std::size_t>(2 * i));
    }
}

GradientField ScoreNet::forward(const Params& p, const PackingInstance& inst, const SolutionState& s,
                                double t, const GeoCache& geo, Tape* tape_out) const {
    const std::size_t n = inst.polygon_ids.size();
    if (s.v.size() != 2 * n) throw std::invalid_argument("state size does not match instance");
    for (double v : s.v)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite solution state");
    if (t < schedule_.epsilon * (1.0 - 1e-12) || t > 1.0)
        throw std::out_of_range("forward: t must lie in [epsilon, 1]");

    Tape local;
    Tape& tape = tape_out ? *tape_out : local;
    tape = Tape{};
    tape.valid = true;
    tape.t = t;
    tape.sigma = schedule_.sigma(t);
    tape.shape_ids.assign(inst.polygon_ids.begin(), inst.polygon_ids.end());
    tape.pos = s.v;
    tape.graphs = build_graphs(inst, s);

    const int D = cfg_.node_dim();
    tape.node.assign(n * static_cast<std::size_t>(D), 0.0);

    // position embeddings
    tape.fp_h0.resize(n * static_cast<std::size_t>(cfg_.fp_dim));
    tape.fp.resize(n * static_cast<std::size_t>(cfg_.fp_dim));
    for (std::size_t i = 0; i < n; ++i) {
        double* h0 = tape.fp_h0.data() + i * static_cast<std::size_t>(cfg_.fp_dim);
        double* f = tape.fp.data() + i * static_cast<std::size_t>(cfg_.fp_dim);
        linear_fwd(tape.pos.data() + 2 * i, 2, P(p, "pos.l0.w"), P(p, "pos.l0.b"), h0);
        tanh_inplace(h0, cfg_.fp_dim);
        linear_fwd(h0, cfg_.fp_dim, P(p, "pos.l1.w"), P(p, "pos.l1.b"), f);
        tanh_inplace(f, cfg_.fp_dim);
    }

    // shared constraint embedding
    const auto cf = constraint_features(inst.container);
    tape.fc_in.assign(cf.begin(), cf.end());
    tape.fc_h0.resize(static_cast<std::size_t>(cfg_.fc_dim));
    tape.fc.resize(static_cast<std::size_t>(cfg_.fc_dim));
    linear_fwd(tape.fc_in.data(), 4, P(p, "cons.l0.w"), P(p, "cons.l0.b"), tape.fc_h0.data());
    tanh_inplace(tape.fc_h0.data(), cfg_.fc_dim);
    linear_fwd(tape.fc_h0.data(), cfg_.fc_dim, P(p, "cons.l1.w"), P(p, "cons.l1.b"), tape.fc.data());
    tanh_inplace(tape.fc.data(), cfg_.fc_dim);

    // time embedding
    tape.ft_in = time_features(t, cfg_.ft_freqs);
    tape.ft.resize(static_cast<std::size_t>(cfg_.ft_dim));
    linear_fwd(tape.ft_in.data(), 2 * cfg_.ft_freqs, P(p, "time.l0.w"), P(p, "time.l0.b"), tape.ft.data());
    tanh_inplace(tape.ft.data(), cfg_.ft_dim);

    for (std::size_t i = 0; i < n; ++i) {
        const auto it = geo.find(inst.polygon_ids[i]);
        if (it == geo.end()) throw std::runtime_error("missing geometry encoding for shape");
        double* node = tape.node.data() + i * static_cast<std::size_t>(D);
        std::copy(it->second.fg.begin(), it->second.fg.end(), node);
        std::copy(tape.fp.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(cfg_.fp_dim)),
                  tape.fp.begin() + static_cast<std::ptrdiff_t>((i + 1) * static_cast<std::size_t>(cfg_.fp_dim)),
                  node + cfg_.fg_dim);
        std::copy(tape.fc.begin(), tape.fc.end(), node + cfg_.fg_dim + cfg_.fp_dim);
        std::copy(tape.ft.begin(), tape.ft.end(), node + cfg_.fg_dim + cfg_.fp_dim + cfg_.fc_dim);
    }

    GradientField out;
    out.global_field.assign(2 * n, 0.0);
    out.local_field.assign(2 * n, 0.0);
    out.intersection_field.assign(2 * n, 0.0);
    out.aggregate.assign(2 * n, 0.0);
    std::vector<double>* fields[3] = {&out.global_field, &out.local_field, &out.intersection_field};
    const std::vector<std::pair<int, int>>* edge_sets[3] = {&tape.graphs.global_edges,
                                                            &tape.graphs.local_edges,
                                                            &tape.graphs.intersection_edges};

    int enabled = 0;
    for (int L = 0; L < 3; ++L) {
        if (!cfg_.layer_mask[static_cast<std::size_t>(L)]) continue;
        ++enabled;
        auto& layer = tape.layers[static_cast<std::size_t>(L)];
        layer.edges = *edge_sets[L];
        edge_messages(p, kLayerPrefix[L], tape, layer, static_cast<int>(n));
        for (std::size_t i = 0; i < 2 * n; ++i) (*fields[L])[i] = layer.raw[i] / tape.sigma;
    }
    if (enabled > 0) {
        const double scale = cfg_.aggregate_mean ? 1.0 / static_cast<double>(enabled) : 1.0;
        for (int L = 0; L < 3; ++L) {
            if (!cfg_.layer_mask[static_cast<std::size_t>(L)]) continue;
            for (std::size_t i = 0; i < 2 * n; ++i) out.aggregate[i] += scale * (*fields[L])[i];
        }
    }
    return out;
}

GradientField ScoreNet::forward(const Params& p, const PackingInstance& inst, const SolutionState& s,
                                double t) const {
    GeoCache geo;
    for (int id : inst.polygon_ids)
        if (!geo.count(id)) geo.emplace(id, encode_shape(p, id));
    return forward(p, inst, s, t, geo);
}

void ScoreNet::backward(const Params& p, const Tape& tape, const GradientField& upstream, Params& grads,
                        std::unordered_map<int, std::vector<double>>& dfg) const {
    if (!tape.valid) throw std::logic_error("backward called without a recorded forward pass");
    const std::size_t n = tape.shape_ids.size();
    const int D = cfg_.node_dim();
    const int M = cfg_.msg_dim;
    const int Pd = cfg_.pos_dim;
    const int H = cfg_.msg_hidden;

    int enabled = 0;
    for (int L = 0; L < 3; ++L)
        if (cfg_.layer_mask[static_cast<std::size_t>(L)]) ++enabled;
    const double agg_scale =
        enabled > 0 ? (cfg_.aggregate_mean ? 1.0 / static_cast<double>(enabled) : 1.0) : 0.0;

    std::vector<double> d_node(n * static_cast<std::size_t>(D), 0.0);

    const std::vector<double>* dfields[3] = {&upstream.global_field, &upstream.local_field,
                                             &upstream.intersection_field};

    std::vector<double> ein(static_cast<std::size_t>(2 * D));
    std::vector<double> dein(static_cast<std::size_t>(2 * D));
    std::vector<double> q(2);
    std::vector<double> dm1(static_cast<std::size_t>(M));
    std::vector<double> dm0(static_cast<std::size_t>(H));
    std::vector<double> dp1(static_cast<std::size_t>(Pd));
    std::vector<double> dp0(static_cast<std::size_t>(Pd));

    for (int L = 0; L < 3; ++L) {
        if (!cfg_.layer_mask[static_cast<std::size_t>(L)]) continue;
        const auto& layer = tape.layers[static_cast<std::size_t>(L)];
        const std::string prefix = kLayerPrefix[L];
        const Tensor& Wm0 = P(p, prefix + ".msg.l0.w");
        const Tensor& Wm1 = P(p, prefix + ".msg.l1.w");
        const Tensor& Wp0 = P(p, prefix + ".pos.l0.w");
        const Tensor& Wp1 = P(p, prefix + ".pos.l1.w");
        const Tensor& Wh0 = P(p, prefix + ".head.l0.w");
        const Tensor& Wh1 = P(p, prefix + ".head.l1.w");
        Tensor& dWm0 = G(grads, prefix + ".msg.l0.w");
        Tensor& dbm0 = G(grads, prefix + ".msg.l0.b");
        Tensor& dWm1 = G(grads, prefix + ".msg.l1.w");
        Tensor& dbm1 = G(grads, prefix + ".msg.l1.b");
        Tensor& dWp0 = G(grads, prefix + ".pos.l0.w");
        Tensor& dbp0 = G(grads, prefix + ".pos.l0.b");
        Tensor& dWp1 = G(grads, prefix + ".pos.l1.w");
        Tensor& dbp1 = G(grads, prefix + ".pos.l1.b");
        Tensor& dWh0 = G(grads, prefix + ".head.l0.w");
        Tensor& dbh0 = G(grads, prefix + ".head.l0.b");
        Tensor& dWh1 = G(grads, prefix + ".head.l1.w");
        Tensor& dbh1 = G(grads, prefix + ".head.l1.b");

        // per-edge aggregated message gradients (scattered from node maxima)
        std::vector<double> d_m1_all(layer.edges.size() * static_cast<std::size_t>(M), 0.0);
        std::vector<double> d_p1_all(layer.edges.size() * static_cast<std::size_t>(Pd), 0.0);

        std::vector<double> dagg(static_cast<std::size_t>(M + Pd));
        std::vector<double> dh(static_cast<std::size_t>(cfg_.head_hidden));
        for (std::size_t i = 0; i < n; ++i) {
            double draw[2];
            draw[0] = ((*dfields[L])[2 * i] + agg_scale * upstream.aggregate[2 * i]) / tape.sigma;
            draw[1] = ((*dfields[L])[2 * i + 1] + agg_scale * upstream.aggregate[2 * i + 1]) / tape.sigma;
            if (draw[0] == 0.0 && draw[1] == 0.0) continue;

            const double* h = layer.h.data() + i * static_cast<std::size_t>(cfg_.head_hidden);
            std::fill(dh.begin(), dh.end(), 0.0);
            linear_bwd(h, draw, cfg_.head_hidden, Wh1, dWh1, dbh1, dh.data());
            tanh_bwd_inplace(h, dh.data(), cfg_.head_hidden);
            const double* agg = layer.agg.data() + i * static_cast<std::size_t>(M + Pd);
            std::fill(dagg.begin(), dagg.end(), 0.0);
            linear_bwd(agg, dh.data(), M + Pd, Wh0, dWh0, dbh0, dagg.data());

            for (int ch = 0; ch < M; ++ch) {
                const int e = layer.arg_m[i * static_cast<std::size_t>(M) + static_cast<std::size_t>(ch)];
                if (e >= 0)
                    d_m1_all[static_cast<std::size_t>(e) * static_cast<std::size_t>(M) +
                             static_cast<std::size_t>(ch)] += dagg[static_cast<std::size_t>(ch)];
            }
            for (int ch = 0; ch < Pd; ++ch) {
                const int e = layer.arg_p[i * static_cast<std::size_t>(Pd) + static_cast<std::size_t>(ch)];
                if (e >= 0)
                    d_p1_all[static_cast<std::size_t>(e) * static_cast<std::size_t>(Pd) +
                             static_cast<std::size_t>(ch)] += dagg[static_cast<std::size_t>(M + ch)];
            }
        }

        for (std::size_t e = 0; e < layer.edges.size(); ++e) {
            const double* dm1_src = d_m1_all.data() + e * static_cast<std::size_t>(M);
            const double* dp1_src = d_p1_all.data() + e * static_cast<std::size_t>(Pd);
            bool any = false;
            for (int ch = 0; ch < M && !any; ++ch) any = dm1_src[ch] != 0.0;
            for (int ch = 0; ch < Pd && !any; ++ch) any = dp1_src[ch] != 0.0;
            if (!any) continue;

            const int i = layer.edges[e].first;
            const int j = layer.edges[e].second;
            const double* ni = tape.node.data() + static_cast<std::size_t>(i) * D;
            const double* nj = tape.node.data() + static_cast<std::size_t>(j) * D;
            for (int d = 0; d < D; ++d) {
                ein[static_cast<std::size_t>(d)] = ni[d];
                ein[static_cast<std::size_t>(D + d)] = ni[d] - nj[d];
            }

            const double* m0 = layer.m0.data() + e * static_cast<std::size_t>(H);
            const double* m1 = layer.m1.data() + e * static_cast<std::size_t>(M);
            std::copy(dm1_src, dm1_src + M, dm1.begin());
            tanh_bwd_inplace(m1, dm1.data(), M);
            std::fill(dm0.begin(), dm0.end(), 0.0);
            linear_bwd(m0, dm1.data(), H, Wm1, dWm1, dbm1, dm0.data());
            tanh_bwd_inplace(m0, dm0.data(), H);
            std::fill(dein.begin(), dein.end(), 0.0);
            linear_bwd(ein.data(), dm0.data(), 2 * D, Wm0, dWm0, dbm0, dein.data());

            double* dni = d_node.data() + static_cast<std::size_t>(i) * D;
            double* dnj = d_node.data() + static_cast<std::size_t>(j) * D;
            for (int d = 0; d < D; ++d) {
                dni[d] += dein[static_cast<std::size_t>(d)] + dein[static_cast<std::size_t>(D + d)];
                dnj[d] -= dein[static_cast<std::size_t>(D + d)];
            }

            const double* p0 = layer.p0.data() + e * static_cast<std::size_t>(Pd);
            const double* p1 = layer.p1.data() + e * static_cast<std::size_t>(Pd);
            q[0] = tape.pos[static_cast<std::size_t>(2 * i)] - tape.pos[static_cast<std::size_t>(2 * j)];
            q[1] = tape.pos[static_cast<std::size_t>(2 * i + 1)] - tape.pos[static_cast<std::size_t>(2 * j + 1)];
            std::copy(dp1_src, dp1_src + Pd, dp1.begin());
            tanh_bwd_inplace(p1, dp1.data(), Pd);
            std::fill(dp0.begin(), dp0.end(), 0.0);
            linear_bwd(p0, dp1.data(), Pd, Wp1, dWp1, dbp1, dp0.data());
            tanh_bwd_inplace(p0, dp0.data(), Pd);
            linear_bwd(q.data(), dp0.data(), 2, Wp0, dWp0, dbp0, nullptr);
        }
    }

    // split node gradients into the encoder inputs
    std::vector<double> d_fc(static_cast<std::size_t>(cfg_.fc_dim), 0.0);
    std::vector<double> d_ft(static_cast<std::size_t>(cfg_.ft_dim), 0.0);
    std::vector<double> d_fp(static_cast<std::size_t>(cfg_.fp_dim));
    for (std::size_t i = 0; i < n; ++i) {
        const double* dnode = d_node.data() + i * static_cast<std::size_t>(D);

        auto& acc = dfg[tape.shape_ids[i]];
        if (acc.empty()) acc.assign(static_cast<std::size_t>(cfg_.fg_dim), 0.0);
        for (int d = 0; d < cfg_.fg_dim; ++d) acc[static_cast<std::size_t>(d)] += dnode[d];

        std::copy(dnode + cfg_.fg_dim, dnode + cfg_.fg_dim + cfg_.fp_dim, d_fp.begin());
        const double* fp = tape.fp.data() + i * static_cast<std::size_t>(cfg_.fp_dim);
        const double* fp_h0 = tape.fp_h0.data() + i * static_cast<std::size_t>(cfg_.fp_dim);
        tanh_bwd_inplace(fp, d_fp.data(), cfg_.fp_dim);
        std::vector<double> d_h0(static_cast<std::size_t>(cfg_.fp_dim), 0.0);
        linear_bwd(fp_h0, d_fp.data(), cfg_.fp_dim, P(p, "pos.l1.w"), G(grads, "pos.l1.w"),
                   G(grads, "pos.l1.b"), d_h0.data());
        tanh_bwd_inplace(fp_h0, d_h0.data(), cfg_.fp_dim);
        linear_bwd(tape.pos.data() + 2 * i, d_h0.data(), 2, P(p, "pos.l0.w"), G(grads, "pos.l0.w"),
                   G(grads, "pos.l0.b"), nullptr);

        for (int d = 0; d < cfg_.fc_dim; ++d)
            d_fc[static_cast<std::size_t>(d)] += dnode[cfg_.fg_dim + cfg_.fp_dim + d];
        for (int d = 0; d < cfg_.ft_dim; ++d)
            d_ft[static_cast<std::size_t>(d)] += dnode[cfg_.fg_dim + cfg_.fp_dim + cfg_.fc_dim + d];
    }

    tanh_bwd_inplace(tape.fc.data(), d_fc.data(), cfg_.fc_dim);
    std::vector<double> d_fc_h0(static_cast<std::size_t>(cfg_.fc_dim), 0.0);
    linear_bwd(tape.fc_h0.data(), d_fc.data(), cfg_.fc_dim, P(p, "cons.l1.w"), G(grads, "cons.l1.w"),
               G(grads, "cons.l1.b"), d_fc_h0.data());
    tanh_bwd_inplace(tape.fc_h0.data(), d_fc_h0.data(), cfg_.fc_dim);
    linear_bwd(tape.fc_in.data(), d_fc_h0.data(), 4, P(p, "cons.l0.w"), G(grads, "cons.l0.w"),
               G(grads, "cons.l0.b"), nullptr);

    tanh_bwd_inplace(tape.ft.data(), d_ft.data(), cfg_.ft_dim);
    linear_bwd(tape.ft_in.data(), d_ft.data(), 2 * cfg_.ft_freqs, P(p, "time.l0.w"),
               G(grads, "time.l0.w"), G(grads, "time.l0.b"), nullptr);
}

}  // namespace gradnest::net
