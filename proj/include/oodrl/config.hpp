#pragma once

#include <string>

#include "oodrl/agent.hpp"
#include "oodrl/gridworld.hpp"
#include "oodrl/qnet.hpp"

namespace oodrl {

struct ExperimentConfig {
    ModelHyper model;
    TrainConfig train;
    GridOverrides grid;
    int eval_runs = 30;
    int jobs = 1;
    std::string out_dir = "out";
};

// Flat INI-style key-value text with [model]/[train]/[grid]/[eval]/[output]
// sections. Unknown sections or keys are rejected by name; missing keys take
// defaults. Throws std::invalid_argument with the offending key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Canonical form: fixed section and key order, shortest round-trip numbers.
// serialize(parse(serialize(x))) == serialize(x).
std::string serialize_config(const ExperimentConfig& cfg);

std::uint64_t config_hash(const ExperimentConfig& cfg);

void validate(const ExperimentConfig& cfg);

}  // namespace oodrl
