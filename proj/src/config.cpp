#include "oodrl/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "oodrl/csvfmt.hpp"

namespace oodrl {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

int to_int(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" +
                                    value + "'");
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' expects an unsigned integer, got '" +
                                    value + "'");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        return parse_double(value);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + value +
                                    "'");
    }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("config: malformed section header at line " +
                                            std::to_string(line_no));
            section = line.substr(1, line.size() - 2);
            if (section != "model" && section != "train" && section != "grid" &&
                section != "eval" && section != "output")
                throw std::invalid_argument("config: unknown section '" + section + "'");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key = value at line " +
                                        std::to_string(line_no));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string qual = section.empty() ? key : section + "." + key;

        if (qual == "model.kind") cfg.model.kind = model_kind_from_name(value);
        else if (qual == "model.mc_passes") cfg.model.mc_passes = to_int(qual, value);
        else if (qual == "model.heads") cfg.model.heads = to_int(qual, value);
        else if (qual == "model.beta") cfg.model.beta = to_double(qual, value);
        else if (qual == "model.keep_prob") cfg.model.keep_prob = to_double(qual, value);
        else if (qual == "model.concrete_temperature")
            cfg.model.concrete_temperature = to_double(qual, value);
        else if (qual == "model.concrete_init_drop")
            cfg.model.concrete_init_drop = to_double(qual, value);
        else if (qual == "model.lambda_w") cfg.model.lambda_w = to_double(qual, value);
        else if (qual == "model.lambda_d") cfg.model.lambda_d = to_double(qual, value);
        else if (qual == "train.episodes") cfg.train.episodes = to_int(qual, value);
        else if (qual == "train.gamma") cfg.train.gamma = to_double(qual, value);
        else if (qual == "train.lr") cfg.train.lr = to_double(qual, value);
        else if (qual == "train.batch_size") cfg.train.batch_size = to_int(qual, value);
        else if (qual == "train.replay_capacity") cfg.train.replay_capacity = to_int(qual, value);
        else if (qual == "train.warmup_transitions")
            cfg.train.warmup_transitions = to_int(qual, value);
        else if (qual == "train.target_sync_interval")
            cfg.train.target_sync_interval = to_int(qual, value);
        else if (qual == "train.eps_start") cfg.train.eps_start = to_double(qual, value);
        else if (qual == "train.eps_end") cfg.train.eps_end = to_double(qual, value);
        else if (qual == "train.eps_decay_episodes")
            cfg.train.eps_decay_episodes = to_int(qual, value);
        else if (qual == "train.mask_prob") cfg.train.mask_prob = to_double(qual, value);
        else if (qual == "train.snapshot_interval")
            cfg.train.snapshot_interval = to_int(qual, value);
        else if (qual == "train.seed") cfg.train.seed = to_u64(qual, value);
        else if (qual == "grid.max_steps") cfg.grid.max_steps = to_int(qual, value);
        else if (qual == "grid.wall_column") cfg.grid.wall_column = to_int(qual, value);
        else if (qual == "grid.wall_gap_row") cfg.grid.wall_gap_row = to_int(qual, value);
        else if (qual == "eval.runs") cfg.eval_runs = to_int(qual, value);
        else if (qual == "eval.jobs") cfg.jobs = to_int(qual, value);
        else if (qual == "output.dir") cfg.out_dir = value;
        else throw std::invalid_argument("config: unknown key '" + qual + "'");
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "[model]\n";
    out << "kind = " << model_kind_name(cfg.model.kind) << "\n";
    out << "mc_passes = " << cfg.model.mc_passes << "\n";
    out << "heads = " << cfg.model.heads << "\n";
    out << "beta = " << fmt_double(cfg.model.beta) << "\n";
    out << "keep_prob = " << fmt_double(cfg.model.keep_prob) << "\n";
    out << "concrete_temperature = " << fmt_double(cfg.model.concrete_temperature) << "\n";
    out << "concrete_init_drop = " << fmt_double(cfg.model.concrete_init_drop) << "\n";
    out << "lambda_w = " << fmt_double(cfg.model.lambda_w) << "\n";
    out << "lambda_d = " << fmt_double(cfg.model.lambda_d) << "\n";
    out << "\n[train]\n";
    out << "episodes = " << cfg.train.episodes << "\n";
    out << "gamma = " << fmt_double(cfg.train.gamma) << "\n";
    out << "lr = " << fmt_double(cfg.train.lr) << "\n";
    out << "batch_size = " << cfg.train.batch_size << "\n";
    out << "replay_capacity = " << cfg.train.replay_capacity << "\n";
    out << "warmup_transitions = " << cfg.train.warmup_transitions << "\n";
    out << "target_sync_interval = " << cfg.train.target_sync_interval << "\n";
    out << "eps_start = " << fmt_double(cfg.train.eps_start) << "\n";
    out << "eps_end = " << fmt_double(cfg.train.eps_end) << "\n";
    out << "eps_decay_episodes = " << cfg.train.eps_decay_episodes << "\n";
    out << "mask_prob = " << fmt_double(cfg.train.mask_prob) << "\n";
    out << "snapshot_interval = " << cfg.train.snapshot_interval << "\n";
    out << "seed = " << cfg.train.seed << "\n";
    out << "\n[grid]\n";
    out << "max_steps = " << cfg.grid.max_steps.value_or(100) << "\n";
    out << "wall_column = " << cfg.grid.wall_column.value_or(6) << "\n";
    out << "wall_gap_row = " << cfg.grid.wall_gap_row.value_or(1) << "\n";
    out << "\n[eval]\n";
    out << "runs = " << cfg.eval_runs << "\n";
    out << "jobs = " << cfg.jobs << "\n";
    out << "\n[output]\n";
    out << "dir = " << cfg.out_dir << "\n";
    return out.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    // The hash identifies the experiment, not where or how fast it ran:
    // output location and thread count are normalized away.
    ExperimentConfig canon = cfg;
    canon.out_dir = "";
    canon.jobs = 1;
    const std::string text = serialize_config(canon);
    return fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void validate(const ExperimentConfig& cfg) {
    validate(cfg.train);
    if (cfg.model.mc_passes < 1)
        throw std::invalid_argument("config: model.mc_passes must be >= 1");
    if (cfg.model.is_ensemble() && cfg.model.heads < 2)
        throw std::invalid_argument("config: model.heads must be >= 2");
    if (cfg.model.beta < 0.0) throw std::invalid_argument("config: model.beta must be >= 0");
    if (!(cfg.model.keep_prob > 0.0) || cfg.model.keep_prob > 1.0)
        throw std::invalid_argument("config: model.keep_prob must be in (0,1]");
    if (!(cfg.model.concrete_temperature > 0.0))
        throw std::invalid_argument("config: model.concrete_temperature must be > 0");
    if (!(cfg.model.concrete_init_drop > 0.0) || cfg.model.concrete_init_drop >= 1.0)
        throw std::invalid_argument("config: model.concrete_init_drop must be in (0,1)");
    if (cfg.eval_runs < 1) throw std::invalid_argument("config: eval.runs must be >= 1");
    if (cfg.jobs < 1) throw std::invalid_argument("config: eval.jobs must be >= 1");
    // environment invariants (connectivity) are checked by construction
    make_env(Variant::train, cfg.grid);
}

}  // namespace oodrl
