#pragma once

#include <cstdint>
#include <vector>

#include "oodrl/gridworld.hpp"
#include "oodrl/qnet.hpp"

namespace oodrl {

struct TrainConfig {
    int episodes = 10000;
    double gamma = 0.99;
    double lr = 1e-3;
    int batch_size = 32;
    int replay_capacity = 10000;
    int warmup_transitions = 500;
    int target_sync_interval = 100;  // gradient steps
    double eps_start = 1.0;
    double eps_end = 0.05;
    int eps_decay_episodes = 2000;
    double mask_prob = 0.2;  // bootstrap-mask Bernoulli parameter
    int snapshot_interval = 100;
    std::uint64_t seed = 1;
};

void validate(const TrainConfig& cfg);

enum class Provenance : std::uint8_t { training = 0 };

struct ReplayItem {
    std::vector<double> obs;
    int action = 0;
    double reward = 0.0;
    std::vector<double> next_obs;
    bool done = false;
    std::vector<std::uint8_t> mask;  // ensemble kinds only
    long long key = 0;               // prior-cache key of obs
    long long next_key = 0;
    Provenance source = Provenance::training;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(int capacity);
    void push(ReplayItem item);  // evicts the oldest item at capacity
    std::vector<const ReplayItem*> sample(int n, Rng& rng) const;
    size_t size() const { return items_.size(); }
    const ReplayItem& at(size_t i) const { return items_[(head_ + i) % items_.size()]; }

private:
    size_t capacity_;
    size_t head_ = 0;  // index of the oldest item once full
    std::vector<ReplayItem> items_;
};

std::vector<std::uint8_t> sample_bootstrap_mask(int k, double p, Rng& rng);

// argmax with lowest-index tie-break
int greedy_action(std::span<const double> q);
int eps_greedy_action(std::span<const double> q, double eps, Rng& rng);

// One TD target per head (a single entry for dropout kinds). Next-state
// values come from the target network run in eval mode; ensemble head k
// bootstraps from its own head (prior term included for bootp).
std::vector<std::vector<double>> compute_targets(const QNet& target_net,
                                                 const std::vector<const ReplayItem*>& batch,
                                                 double gamma, PriorCache* cache);

struct BatchLoss {
    double loss = 0.0;
    QNetGrads grads;
};

// Exact gradient of the scalar training loss (mean over the batch; concrete
// regularizers included for mccd). `noise` is required for dropout kinds and
// must have one entry per item.
BatchLoss batch_loss_grads(const QNet& net, const std::vector<const ReplayItem*>& batch,
                           const std::vector<std::vector<double>>& targets,
                           const std::vector<QNetNoise>* noise, PriorCache* cache);
double batch_loss_only(const QNet& net, const std::vector<const ReplayItem*>& batch,
                       const std::vector<std::vector<double>>& targets,
                       const std::vector<QNetNoise>* noise, PriorCache* cache);

// Samples gate noise, computes loss and gradients, rescales trunk gradients
// by 1/K for ensembles, and applies one optimizer step. A non-finite loss
// skips the step and returns NaN.
double train_batch(QNet& net, const QNet& target_net, const std::vector<const ReplayItem*>& batch,
                   double gamma, AdamState& opt, const AdamHyper& hyper, Rng& rng,
                   PriorCache* cache);

struct TrainLogRow {
    int episode = 0;
    double episode_return = 0.0;
    int length = 0;
    double epsilon = 0.0;
    double mean_loss = 0.0;
};

struct TrainResult {
    std::vector<Snapshot> snapshots;
    std::vector<TrainLogRow> log;
};

double epsilon_at(const TrainConfig& cfg, int episode);

// Full training run in the given (train-variant) environment. Snapshots are
// taken every snapshot_interval episodes plus at the final episode.
TrainResult train(const TrainConfig& cfg, const ModelHyper& hyper, const GridSpec& spec,
                  std::uint64_t config_hash = 0);

}  // namespace oodrl
