#pragma once

#include <string>
#include <vector>

#include "oodrl/config.hpp"
#include "oodrl/eval.hpp"

namespace oodrl {

// Trains per config and writes snap_<episode>.bin plus train_log.csv into
// the run directory. Returns the snapshots for further processing.
std::vector<Snapshot> train_to_dir(const ExperimentConfig& cfg, const std::string& dir);

// Loads every snap_*.bin in the directory, ordered by episode.
std::vector<Snapshot> load_snapshots(const std::string& dir);

// Evaluates every snapshot in both variants (eval_runs each) and writes
// traces.csv and metrics.csv. Evaluation runs may be spread over cfg.jobs
// threads; output is independent of the thread count.
std::vector<MetricsRow> evaluate_snapshots(const ExperimentConfig& cfg,
                                           const std::vector<Snapshot>& snapshots,
                                           const std::string& dir);

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& log);

// Full pipeline: train, evaluate, plot, manifest. Returns 0 on success; on
// failure partial artifacts are retained and the manifest marks the run
// failed. The manifest records the config hash, seed, and a content hash of
// every artifact.
int run_experiment(const ExperimentConfig& cfg);

std::uint64_t hash_file(const std::string& path);

}  // namespace oodrl
