#include "oodrl/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "oodrl/csvfmt.hpp"
#include "oodrl/plot.hpp"

namespace fs = std::filesystem;

namespace oodrl {

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& log) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_train_log: cannot open " + path);
    out << "episode,return,length,epsilon,mean_loss\n";
    for (const auto& row : log)
        out << row.episode << ',' << fmt_double(row.episode_return) << ',' << row.length << ','
            << fmt_double(row.epsilon) << ',' << fmt_double(row.mean_loss) << '\n';
    if (!out) throw std::runtime_error("write_train_log: write failed for " + path);
}

std::vector<Snapshot> train_to_dir(const ExperimentConfig& cfg, const std::string& dir) {
    fs::create_directories(dir);
    const GridSpec spec = make_env(Variant::train, cfg.grid);
    TrainResult result = train(cfg.train, cfg.model, spec, config_hash(cfg));
    for (const auto& snap : result.snapshots)
        save_snapshot(snap, (fs::path(dir) / ("snap_" + std::to_string(snap.episode) + ".bin")).string());
    write_train_log((fs::path(dir) / "train_log.csv").string(), result.log);
    return std::move(result.snapshots);
}

std::vector<Snapshot> load_snapshots(const std::string& dir) {
    std::vector<Snapshot> snapshots;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("snap_", 0) == 0 && entry.path().extension() == ".bin")
            snapshots.push_back(load_snapshot(entry.path().string()));
    }
    std::sort(snapshots.begin(), snapshots.end(),
              [](const Snapshot& a, const Snapshot& b) { return a.episode < b.episode; });
    if (snapshots.empty()) throw std::runtime_error("load_snapshots: no snapshots in " + dir);
    return snapshots;
}

std::vector<MetricsRow> evaluate_snapshots(const ExperimentConfig& cfg,
                                           const std::vector<Snapshot>& snapshots,
                                           const std::string& dir) {
    fs::create_directories(dir);
    const GridSpec train_spec = make_env(Variant::train, cfg.grid);
    const GridSpec mirror_spec = make_env(Variant::mirror, cfg.grid);
    std::vector<EpisodeTrace> all_traces;
    std::vector<MetricsRow> metrics;
    for (const auto& snap : snapshots) {
        auto train_traces = run_evaluation_parallel(snap, train_spec, Variant::train,
                                                    cfg.eval_runs, cfg.train.seed, cfg.jobs);
        auto mirror_traces = run_evaluation_parallel(snap, mirror_spec, Variant::mirror,
                                                     cfg.eval_runs, cfg.train.seed, cfg.jobs);
        metrics.push_back(aggregate(snap.episode, train_traces, mirror_traces));
        for (auto& t : train_traces) all_traces.push_back(std::move(t));
        for (auto& t : mirror_traces) all_traces.push_back(std::move(t));
    }
    write_traces_csv((fs::path(dir) / "traces.csv").string(), all_traces);
    write_metrics_csv((fs::path(dir) / "metrics.csv").string(), metrics);
    return metrics;
}

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("hash_file: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return fnv1a(bytes);
}

int run_experiment(const ExperimentConfig& cfg) {
    const std::string dir = cfg.out_dir;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["config_hash"] = config_hash(cfg);
    manifest["seed"] = cfg.train.seed;
    manifest["model"] = model_kind_name(cfg.model.kind);
    manifest["success"] = false;

    auto finish = [&](bool ok) {
        manifest["success"] = ok;
        nlohmann::json artifacts = nlohmann::json::object();
        for (const auto& entry : fs::directory_iterator(dir)) {
            const std::string name = entry.path().filename().string();
            if (name == "manifest.json") continue;
            artifacts[name] = hash_file(entry.path().string());
        }
        manifest["artifacts"] = artifacts;
        std::ofstream out(fs::path(dir) / "manifest.json", std::ios::trunc);
        out << manifest.dump(2) << '\n';
        return ok ? 0 : 1;
    };

    try {
        {
            std::ofstream out(fs::path(dir) / "config.ini", std::ios::trunc);
            out << serialize_config(cfg);
        }
        const auto snapshots = train_to_dir(cfg, dir);
        const auto metrics = evaluate_snapshots(cfg, snapshots, dir);
        emit_plot(metrics, (fs::path(dir) / "uncertainty.svg").string());
    } catch (const std::exception& e) {
        std::cerr << "run_experiment: " << e.what() << '\n';
        manifest["error"] = e.what();
        return finish(false);
    }
    return finish(true);
}

}  // namespace oodrl
