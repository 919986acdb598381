#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "gradnest/net.hpp"

namespace gradnest::net {

// Adam moments plus the step counter; stored with a checkpoint so training
// resumes bit-exactly.
struct TrainerState {
    std::uint64_t step{0};
    Params m;
    Params v;
};

struct Checkpoint {
    NetConfig config;
    Params params;
    std::optional<TrainerState> trainer;
};

// Versioned binary blob of named tensors. Loading validates shapes against
// the stored config and rejects mismatches.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::string net_config_to_json(const NetConfig& cfg);
NetConfig net_config_from_json(const std::string& text);

}  // namespace gradnest::net
