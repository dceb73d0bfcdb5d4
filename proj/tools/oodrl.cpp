#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oodrl/experiment.hpp"
#include "oodrl/plot.hpp"

namespace fs = std::filesystem;
using namespace oodrl;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string model;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int episodes = 0;
    int eval_runs = 0;
    int snapshot_interval = 0;
    int jobs = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "experiment config file (INI)");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "base seed")->each([&opts](const std::string&) {
        opts.seed_set = true;
    });
    cmd->add_option("--model", opts.model, "model kind: mcd|mccd|boot|bootp");
    cmd->add_option("--episodes", opts.episodes, "training episodes");
    cmd->add_option("--eval-runs", opts.eval_runs, "evaluation runs per snapshot and variant");
    cmd->add_option("--snapshot-interval", opts.snapshot_interval, "episodes between snapshots");
    cmd->add_option("--jobs", opts.jobs, "evaluation worker threads");
}

ExperimentConfig resolve_config(const CommonOpts& opts) {
    ExperimentConfig cfg =
        opts.config_path.empty() ? ExperimentConfig{} : load_config(opts.config_path);
    if (const char* env = std::getenv("OODRL_OUT")) cfg.out_dir = env;
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (!opts.model.empty()) cfg.model.kind = model_kind_from_name(opts.model);
    if (opts.seed_set) cfg.train.seed = opts.seed;
    if (opts.episodes > 0) cfg.train.episodes = opts.episodes;
    if (opts.eval_runs > 0) cfg.eval_runs = opts.eval_runs;
    if (opts.snapshot_interval > 0) cfg.train.snapshot_interval = opts.snapshot_interval;
    if (opts.jobs > 0) cfg.jobs = opts.jobs;
    validate(cfg);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gridworld Q-learning uncertainty laboratory"};
    app.require_subcommand(1);

    CommonOpts train_opts, eval_opts, plot_opts, run_opts;
    std::vector<std::string> compare_inputs;
    std::string compare_out = "compare.svg";

    auto* cmd_train = app.add_subcommand("train", "train a model and write snapshots");
    add_common(cmd_train, train_opts);
    auto* cmd_eval = app.add_subcommand("evaluate", "evaluate snapshots in both variants");
    add_common(cmd_eval, eval_opts);
    auto* cmd_plot = app.add_subcommand("plot", "render metrics.csv as an SVG figure");
    add_common(cmd_plot, plot_opts);
    auto* cmd_run = app.add_subcommand("run", "train, evaluate and plot in one go");
    add_common(cmd_run, run_opts);
    auto* cmd_compare = app.add_subcommand("compare", "overlay several metrics files");
    cmd_compare->add_option("metrics", compare_inputs, "metrics.csv files")->required();
    cmd_compare->add_option("--out-file", compare_out, "output SVG path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_train->parsed()) {
            const auto cfg = resolve_config(train_opts);
            train_to_dir(cfg, cfg.out_dir);
            std::cout << "trained " << model_kind_name(cfg.model.kind) << " for "
                      << cfg.train.episodes << " episodes -> " << cfg.out_dir << '\n';
        } else if (cmd_eval->parsed()) {
            const auto cfg = resolve_config(eval_opts);
            const auto snapshots = load_snapshots(cfg.out_dir);
            const auto metrics = evaluate_snapshots(cfg, snapshots, cfg.out_dir);
            std::cout << "evaluated " << metrics.size() << " snapshots -> " << cfg.out_dir
                      << "/metrics.csv\n";
        } else if (cmd_plot->parsed()) {
            const auto cfg = resolve_config(plot_opts);
            const auto metrics = read_metrics_csv((fs::path(cfg.out_dir) / "metrics.csv").string());
            const auto out = (fs::path(cfg.out_dir) / "uncertainty.svg").string();
            emit_plot(metrics, out);
            std::cout << "wrote " << out << '\n';
        } else if (cmd_run->parsed()) {
            const auto cfg = resolve_config(run_opts);
            return run_experiment(cfg);
        } else if (cmd_compare->parsed()) {
            std::vector<std::pair<std::string, std::vector<MetricsRow>>> runs;
            for (const auto& path : compare_inputs) {
                const auto label = fs::path(path).parent_path().filename().string();
                runs.emplace_back(label.empty() ? path : label, read_metrics_csv(path));
            }
            emit_compare_plot(runs, compare_out);
            std::cout << "wrote " << compare_out << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
