#pragma once

#include <string>
#include <vector>

#include "oodrl/agent.hpp"
#include "oodrl/gridworld.hpp"
#include "oodrl/qnet.hpp"

namespace oodrl {

struct StepRecord {
    int x = 0;
    int y = 0;
    int action = 0;
    double reward = 0.0;
    double epistemic = 0.0;
    double aleatoric = 0.0;
    bool has_aleatoric = false;
};

struct EpisodeTrace {
    long long snapshot_episode = 0;
    Variant variant = Variant::train;
    int run = 0;
    Outcome outcome = Outcome::running;
    std::vector<StepRecord> steps;
};

// Per-run seed: splitmix-based mix of (base seed, snapshot episode, variant,
// run index). Changing any component changes the stream.
std::uint64_t derive_run_seed(std::uint64_t base_seed, long long snapshot_episode,
                              Variant variant, int run);

// One greedy episode (ensemble mean, or MC mean with T passes for dropout
// kinds). The chosen action's uncertainty is recorded before acting, from
// the same prediction used to act.
EpisodeTrace eval_episode(const QNet& net, long long snapshot_episode, const GridSpec& spec,
                          Variant variant, int run, std::uint64_t base_seed, PriorCache* cache);

// n_runs independent episodes; verifies the snapshot content hash is
// unchanged by evaluation.
std::vector<EpisodeTrace> run_evaluation(const Snapshot& snap, const GridSpec& spec,
                                         Variant variant, int n_runs, std::uint64_t base_seed);

// Same contract and bitwise-identical output, runs distributed over OpenMP
// threads.
std::vector<EpisodeTrace> run_evaluation_parallel(const Snapshot& snap, const GridSpec& spec,
                                                  Variant variant, int n_runs,
                                                  std::uint64_t base_seed, int jobs);

double episode_mean_uncertainty(const EpisodeTrace& trace);

// P(random ood score > random id score), ties counted 1/2. Rank-sum
// implementation; tests check it against the O(n^2) pairwise definition.
double auroc(std::span<const double> ood_scores, std::span<const double> id_scores);

// nearest-rank quantile (rank = ceil(q*n))
double quantile_nearest_rank(std::vector<double> scores, double q);

enum class Detection { in_distribution, out_of_distribution };

// strict inequality: a score equal to the threshold is in-distribution
Detection threshold_detect(double score, double threshold);

struct MetricsRow {
    long long snapshot_episode = 0;
    double train_mean_epi = 0.0;
    double mirror_mean_epi = 0.0;
    int train_runs = 0;
    int mirror_runs = 0;
    double separation = 0.0;
    double auroc = 0.0;
};

MetricsRow aggregate(long long snapshot_episode, const std::vector<EpisodeTrace>& train_traces,
                     const std::vector<EpisodeTrace>& mirror_traces);

void write_traces_csv(const std::string& path, const std::vector<EpisodeTrace>& traces);
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

}  // namespace oodrl
