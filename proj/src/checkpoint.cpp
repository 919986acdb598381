#include "gradnest/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace gradnest::net {

namespace {

constexpr char kMagic[8] = {'G', 'N', 'C', 'K', 'P', 'T', '1', '\n'};

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t get_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw std::runtime_error("checkpoint truncated");
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw std::runtime_error("checkpoint truncated");
    return v;
}

void put_string(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
    const auto len = get_u32(is);
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) throw std::runtime_error("checkpoint truncated");
    return s;
}

void put_params(std::ostream& os, const Params& p) {
    put_u32(os, static_cast<std::uint32_t>(p.size()));
    for (const auto& [name, t] : p) {
        put_string(os, name);
        put_u32(os, static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) put_u32(os, static_cast<std::uint32_t>(d));
        os.write(reinterpret_cast<const char*>(t.v.data()),
                 static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    }
}

Params get_params(std::istream& is) {
    Params p;
    const auto count = get_u32(is);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = get_string(is);
        const auto ndim = get_u32(is);
        std::vector<int> shape(ndim);
        std::size_t total = 1;
        for (auto& d : shape) {
            d = static_cast<int>(get_u32(is));
            total *= static_cast<std::size_t>(d);
        }
        Tensor t;
        t.shape = std::move(shape);
        t.v.resize(total);
        is.read(reinterpret_cast<char*>(t.v.data()), static_cast<std::streamsize>(total * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint truncated in tensor " + name);
        p.emplace(name, std::move(t));
    }
    return p;
}

}  // namespace

std::string net_config_to_json(const NetConfig& cfg) {
    nlohmann::json j;
    j["points"] = cfg.points;
    j["sa_width"] = cfg.sa_width;
    j["sa_k"] = cfg.sa_k;
    j["fg_dim"] = cfg.fg_dim;
    j["fp_dim"] = cfg.fp_dim;
    j["fc_dim"] = cfg.fc_dim;
    j["ft_freqs"] = cfg.ft_freqs;
    j["ft_dim"] = cfg.ft_dim;
    j["msg_hidden"] = cfg.msg_hidden;
    j["msg_dim"] = cfg.msg_dim;
    j["pos_dim"] = cfg.pos_dim;
    j["head_hidden"] = cfg.head_hidden;
    j["d0"] = cfg.d0;
    j["aggregate_mean"] = cfg.aggregate_mean;
    j["layer_mask"] = cfg.layer_mask;
    return j.dump();
}

NetConfig net_config_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    NetConfig cfg;
    cfg.points = j.at("points").get<int>();
    cfg.sa_width = j.at("sa_width").get<std::array<int, 3>>();
    cfg.sa_k = j.at("sa_k").get<std::array<int, 3>>();
    cfg.fg_dim = j.at("fg_dim").get<int>();
    cfg.fp_dim = j.at("fp_dim").get<int>();
    cfg.fc_dim = j.at("fc_dim").get<int>();
    cfg.ft_freqs = j.at("ft_freqs").get<int>();
    cfg.ft_dim = j.at("ft_dim").get<int>();
    cfg.msg_hidden = j.at("msg_hidden").get<int>();
    cfg.msg_dim = j.at("msg_dim").get<int>();
    cfg.pos_dim = j.at("pos_dim").get<int>();
    cfg.head_hidden = j.at("head_hidden").get<int>();
    cfg.d0 = j.at("d0").get<double>();
    cfg.aggregate_mean = j.at("aggregate_mean").get<bool>();
    cfg.layer_mask = j.at("layer_mask").get<std::array<bool, 3>>();
    return cfg;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(path + ": cannot write");
    os.write(kMagic, sizeof kMagic);
    put_u32(os, 1);
    put_string(os, net_config_to_json(ckpt.config));
    put_params(os, ckpt.params);
    put_u32(os, ckpt.trainer ? 1u : 0u);
    if (ckpt.trainer) {
        put_u64(os, ckpt.trainer->step);
        put_params(os, ckpt.trainer->m);
        put_params(os, ckpt.trainer->v);
    }
    if (!os) throw std::runtime_error(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error(path + ": not a checkpoint file");
    const auto version = get_u32(is);
    if (version != 1) throw std::runtime_error(path + ": unsupported checkpoint version");

    Checkpoint ckpt;
    ckpt.config = net_config_from_json(get_string(is));
    ckpt.params = get_params(is);
    if (get_u32(is) == 1) {
        TrainerState ts;
        ts.step = get_u64(is);
        ts.m = get_params(is);
        ts.v = get_params(is);
        ckpt.trainer = std::move(ts);
    }

    // shape validation against a freshly initialised layout
    Rng probe(0);
    // a dummy square is enough to materialise the parameter layout
    geom::Polygon square;
    square.vertices = {{0, 0}, {100, 0}, {100, 100}, {0, 100}};
    square.id = 0;
    net::ScoreNet ref(ckpt.config, std::span<const geom::Polygon>(&square, 1));
    const Params expect = ref.init_params(probe);
    if (expect.size() != ckpt.params.size())
        throw std::runtime_error(path + ": parameter set does not match the stored config");
    for (const auto& [name, t] : expect) {
        const auto it = ckpt.params.find(name);
        if (it == ckpt.params.end())
            throw std::runtime_error(path + ": missing parameter tensor " + name);
        if (it->second.shape != t.shape)
            throw std::runtime_error(path + ": shape mismatch in tensor " + name);
    }
    return ckpt;
}

}  // namespace gradnest::net
