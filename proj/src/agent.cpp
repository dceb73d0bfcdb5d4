#include "oodrl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oodrl {

void validate(const TrainConfig& cfg) {
    if (cfg.episodes < 1) throw std::invalid_argument("config: episodes must be positive");
    if (!(cfg.gamma > 0.0) || cfg.gamma > 1.0)
        throw std::invalid_argument("config: gamma must be in (0,1]");
    if (cfg.batch_size < 1) throw std::invalid_argument("config: batch_size must be positive");
    if (cfg.replay_capacity < 1)
        throw std::invalid_argument("config: replay_capacity must be positive");
    if (cfg.warmup_transitions > cfg.replay_capacity)
        throw std::invalid_argument("config: warmup_transitions exceeds replay_capacity");
    if (cfg.target_sync_interval < 1)
        throw std::invalid_argument("config: target_sync_interval must be positive");
    if (cfg.eps_start < cfg.eps_end || cfg.eps_end < 0.0 || cfg.eps_start > 1.0)
        throw std::invalid_argument("config: need 1 >= eps_start >= eps_end >= 0");
    if (cfg.mask_prob < 0.0 || cfg.mask_prob > 1.0)
        throw std::invalid_argument("config: mask_prob must be in [0,1]");
    if (cfg.snapshot_interval < 1)
        throw std::invalid_argument("config: snapshot_interval must be positive");
}

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(static_cast<size_t>(capacity)) {
    if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    items_.reserve(capacity_);
}

void ReplayBuffer::push(ReplayItem item) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(item));
    } else {
        items_[head_] = std::move(item);
        head_ = (head_ + 1) % capacity_;
    }
}

std::vector<const ReplayItem*> ReplayBuffer::sample(int n, Rng& rng) const {
    if (items_.empty()) throw std::logic_error("ReplayBuffer: sample from empty buffer");
    std::vector<const ReplayItem*> out(n);
    for (int i = 0; i < n; ++i)
        out[i] = &items_[rng.uniform_int(static_cast<std::uint32_t>(items_.size()))];
    return out;
}

std::vector<std::uint8_t> sample_bootstrap_mask(int k, double p, Rng& rng) {
    if (k < 1) throw std::invalid_argument("sample_bootstrap_mask: k must be >= 1");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("sample_bootstrap_mask: p out of range");
    std::vector<std::uint8_t> mask(k);
    for (auto& m : mask) m = rng.bernoulli(p) ? 1 : 0;
    return mask;
}

int greedy_action(std::span<const double> q) {
    int best = 0;
    for (int a = 1; a < static_cast<int>(q.size()); ++a)
        if (q[a] > q[best]) best = a;
    return best;
}

int eps_greedy_action(std::span<const double> q, double eps, Rng& rng) {
    if (eps < 0.0 || eps > 1.0) throw std::invalid_argument("eps_greedy_action: eps out of range");
    if (eps > 0.0 && rng.uniform() < eps)
        return static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(q.size())));
    return greedy_action(q);
}

std::vector<std::vector<double>> compute_targets(const QNet& target_net,
                                                 const std::vector<const ReplayItem*>& batch,
                                                 double gamma, PriorCache* cache) {
    if (batch.empty()) throw std::invalid_argument("compute_targets: empty batch");
    const int A = target_net.n_actions;
    std::vector<std::vector<double>> targets(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        const ReplayItem& item = *batch[i];
        if (target_net.hyper.is_dropout()) {
            double target = item.reward;
            if (!item.done) {
                QNetActs acts = qnet_forward(target_net, item.next_obs, Mode::eval, nullptr);
                const auto& out = acts.head_out[0];
                target += gamma * *std::max_element(out.begin(), out.begin() + A);
            }
            targets[i] = {target};
        } else {
            const int K = static_cast<int>(target_net.heads.size());
            targets[i].assign(K, item.reward);
            if (!item.done) {
                const std::vector<double>* prior =
                    cached_prior_q(target_net, item.next_obs, item.next_key, cache);
                std::vector<double> local_prior;
                if (target_net.hyper.kind == ModelKind::bootp && prior == nullptr) {
                    local_prior = prior_q_values(target_net, item.next_obs);
                    prior = &local_prior;
                }
                QNetActs acts = qnet_forward(target_net, item.next_obs, Mode::eval, nullptr);
                for (int k = 0; k < K; ++k) {
                    double best = -1e300;
                    for (int a = 0; a < A; ++a) {
                        double v = acts.head_out[k][a];
                        if (target_net.hyper.kind == ModelKind::bootp)
                            v = prior_combine(v, (*prior)[k * A + a], target_net.hyper.beta);
                        best = std::max(best, v);
                    }
                    targets[i][k] += gamma * best;
                }
            }
        }
    }
    return targets;
}

static double dropout_item_loss(const QNet& net, const ReplayItem& item, double target,
                                const QNetActs& acts, double inv_batch, QNetGrads* grads) {
    const int A = net.n_actions;
    const auto& out = acts.head_out[0];
    const double mu = out[item.action];
    const double lv_raw = out[A + item.action];
    const double lv = clamp_log_var(lv_raw);
    const double loss = gaussian_nll(mu, lv, target);
    if (grads) {
        double d_mu, d_lv;
        gaussian_nll_grad(mu, lv, target, d_mu, d_lv);
        if (lv_raw < kLogVarMin || lv_raw > kLogVarMax) d_lv = 0.0;
        std::vector<std::vector<double>> head_grads(1);
        head_grads[0].assign(out.size(), 0.0);
        head_grads[0][item.action] = d_mu * inv_batch;
        head_grads[0][A + item.action] = d_lv * inv_batch;
        qnet_backward(net, acts, head_grads, *grads);
    }
    return loss;
}

// concrete-dropout regularizer over the three gate sites; each site gates the
// input of one weight layer
static double concrete_regularizer(const QNet& net, QNetGrads* grads) {
    const LayerParams* layers[3] = {&net.trunk0, &net.trunk1, &net.heads[0]};
    double total = 0.0;
    for (int j = 0; j < 3; ++j) {
        const GateConfig& gate = net.gates[j];
        const double p = gate.drop_prob();
        const double d_in = layers[j]->in_dim;
        double w_sq = 0.0;
        for (double w : layers[j]->w) w_sq += w * w;
        total += net.hyper.lambda_w * w_sq / (1.0 - p) +
                 net.hyper.lambda_d * d_in * (p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
        if (grads) {
            const double w_scale = 2.0 * net.hyper.lambda_w / (1.0 - p);
            LayerGrads& lg =
                (j == 0) ? grads->trunk0 : (j == 1) ? grads->trunk1 : grads->heads[0];
            for (size_t i = 0; i < layers[j]->w.size(); ++i) lg.w[i] += w_scale * layers[j]->w[i];
            grads->gate_logit[j] += net.hyper.lambda_w * w_sq * p / (1.0 - p) +
                                    net.hyper.lambda_d * d_in * gate.drop_logit * p * (1.0 - p);
        }
    }
    return total;
}

static double batch_loss_impl(const QNet& net, const std::vector<const ReplayItem*>& batch,
                              const std::vector<std::vector<double>>& targets,
                              const std::vector<QNetNoise>* noise, PriorCache* cache,
                              QNetGrads* grads) {
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
    if (targets.size() != batch.size())
        throw std::invalid_argument("batch_loss: target count mismatch");
    const int A = net.n_actions;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;

    if (net.hyper.is_dropout()) {
        if (noise == nullptr || noise->size() != batch.size())
            throw std::invalid_argument("batch_loss: dropout kinds need per-item gate noise");
        for (size_t i = 0; i < batch.size(); ++i) {
            QNetActs acts = qnet_forward_noise(net, batch[i]->obs, (*noise)[i]);
            loss += dropout_item_loss(net, *batch[i], targets[i][0], acts, inv_batch, grads) *
                    inv_batch;
        }
        if (net.hyper.kind == ModelKind::mccd) loss += concrete_regularizer(net, grads);
    } else {
        const int K = static_cast<int>(net.heads.size());
        std::vector<std::vector<double>> head_grads(K);
        for (size_t i = 0; i < batch.size(); ++i) {
            const ReplayItem& item = *batch[i];
            if (static_cast<int>(item.mask.size()) != K)
                throw std::invalid_argument("batch_loss: item mask length != head count");
            const std::vector<double>* prior = cached_prior_q(net, item.obs, item.key, cache);
            std::vector<double> local_prior;
            if (net.hyper.kind == ModelKind::bootp && prior == nullptr) {
                local_prior = prior_q_values(net, item.obs);
                prior = &local_prior;
            }
            QNetActs acts = qnet_forward(net, item.obs, Mode::eval, nullptr);
            bool any = false;
            for (int k = 0; k < K; ++k) {
                head_grads[k].clear();
                if (!item.mask[k]) continue;
                double q = acts.head_out[k][item.action];
                if (net.hyper.kind == ModelKind::bootp)
                    q = prior_combine(q, (*prior)[k * A + item.action], net.hyper.beta);
                const double err = q - targets[i][k];
                loss += err * err * inv_batch;
                if (grads) {
                    head_grads[k].assign(A, 0.0);
                    head_grads[k][item.action] = 2.0 * err * inv_batch;
                    any = true;
                }
            }
            if (grads && any) qnet_backward(net, acts, head_grads, *grads);
        }
    }
    return loss;
}

BatchLoss batch_loss_grads(const QNet& net, const std::vector<const ReplayItem*>& batch,
                           const std::vector<std::vector<double>>& targets,
                           const std::vector<QNetNoise>* noise, PriorCache* cache) {
    BatchLoss result;
    result.grads = zero_qnet_grads(net);
    result.loss = batch_loss_impl(net, batch, targets, noise, cache, &result.grads);
    return result;
}

double batch_loss_only(const QNet& net, const std::vector<const ReplayItem*>& batch,
                       const std::vector<std::vector<double>>& targets,
                       const std::vector<QNetNoise>* noise, PriorCache* cache) {
    return batch_loss_impl(net, batch, targets, noise, cache, nullptr);
}

double train_batch(QNet& net, const QNet& target_net, const std::vector<const ReplayItem*>& batch,
                   double gamma, AdamState& opt, const AdamHyper& hyper, Rng& rng,
                   PriorCache* cache) {
    auto targets = compute_targets(target_net, batch, gamma, cache);
    std::vector<QNetNoise> noise;
    const std::vector<QNetNoise>* noise_ptr = nullptr;
    if (net.hyper.is_dropout()) {
        noise.reserve(batch.size());
        for (size_t i = 0; i < batch.size(); ++i) noise.push_back(sample_qnet_noise(net, rng));
        noise_ptr = &noise;
    }
    BatchLoss bl = batch_loss_grads(net, batch, targets, noise_ptr, cache);
    if (!std::isfinite(bl.loss)) return std::nan("");
    if (net.hyper.is_ensemble()) {
        const double scale = 1.0 / static_cast<double>(net.heads.size());
        for (auto& g : bl.grads.trunk0.w) g *= scale;
        for (auto& g : bl.grads.trunk0.b) g *= scale;
        for (auto& g : bl.grads.trunk1.w) g *= scale;
        for (auto& g : bl.grads.trunk1.b) g *= scale;
    }
    adam_step(qnet_param_spans(net), qnet_grad_spans(bl.grads, net), opt, hyper);
    if (net.hyper.kind == ModelKind::mccd)
        for (auto& gate : net.gates)
            gate.drop_logit = std::clamp(gate.drop_logit, -kDropLogitClamp, kDropLogitClamp);
    return bl.loss;
}

double epsilon_at(const TrainConfig& cfg, int episode) {
    const double frac =
        std::min(1.0, static_cast<double>(episode - 1) / std::max(1, cfg.eps_decay_episodes));
    // convex combination so frac == 1 lands exactly on eps_end
    return cfg.eps_start * (1.0 - frac) + cfg.eps_end * frac;
}

static long long state_key(const EnvState& state, const GridSpec& spec) {
    return static_cast<long long>(state.agent) * spec.n_cells() + state.goal;
}

TrainResult train(const TrainConfig& cfg, const ModelHyper& hyper, const GridSpec& spec,
                  std::uint64_t config_hash) {
    validate(cfg);
    const int input_dim = 3 * spec.n_cells();
    QNet net = make_qnet(hyper, input_dim, kNumActions, Rng::derive(cfg.seed, 0x01));
    QNet target_net = net;
    Rng rng(Rng::derive(cfg.seed, 0x02));
    AdamHyper adam{cfg.lr, 0.9, 0.999, 1e-8};
    AdamState opt = make_adam_state(qnet_param_spans(net));
    ReplayBuffer buffer(cfg.replay_capacity);
    PriorCache cache;

    TrainResult result;
    long grad_steps = 0;
    int consecutive_skips = 0;

    for (int ep = 1; ep <= cfg.episodes; ++ep) {
        const double eps = hyper.is_dropout() ? epsilon_at(cfg, ep) : 0.0;
        const int active_head =
            hyper.is_ensemble() ? static_cast<int>(rng.uniform_int(hyper.heads)) : 0;
        EnvState state = reset(spec, rng);
        std::vector<double> obs = encode(state, spec);
        long long key = state_key(state, spec);
        double ep_return = 0.0;
        double loss_sum = 0.0;
        int loss_count = 0;

        while (!state.done) {
            int action;
            if (hyper.is_dropout()) {
                // sample the exploration coin first so greedy prediction can
                // be skipped on random actions
                if (eps > 0.0 && rng.uniform() < eps) {
                    action = static_cast<int>(rng.uniform_int(kNumActions));
                } else {
                    action = greedy_action(mc_predict(net, obs, rng).q.mean_q);
                }
            } else {
                const std::vector<double>* prior = cached_prior_q(net, obs, key, &cache);
                EnsemblePrediction pred = ensemble_predict(net, obs, prior);
                action = greedy_action(pred.head_q[active_head]);
            }

            StepResult sr = step(state, spec, static_cast<Action>(action));
            ep_return += sr.reward;
            std::vector<double> next_obs = encode(state, spec);
            const long long next_key = state_key(state, spec);

            ReplayItem item;
            item.obs = obs;
            item.action = action;
            item.reward = sr.reward;
            item.next_obs = next_obs;
            item.done = state.outcome == Outcome::goal;  // timeouts still bootstrap
            item.key = key;
            item.next_key = next_key;
            if (hyper.is_ensemble())
                item.mask = sample_bootstrap_mask(hyper.heads, cfg.mask_prob, rng);
            buffer.push(std::move(item));

            if (static_cast<int>(buffer.size()) >= cfg.warmup_transitions) {
                auto batch = buffer.sample(cfg.batch_size, rng);
                const double loss =
                    train_batch(net, target_net, batch, cfg.gamma, opt, adam, rng, &cache);
                if (std::isnan(loss)) {
                    if (++consecutive_skips > 100)
                        throw std::runtime_error("train: persistent non-finite losses, aborting");
                } else {
                    consecutive_skips = 0;
                    loss_sum += loss;
                    loss_count += 1;
                }
                if (++grad_steps % cfg.target_sync_interval == 0) target_net = net;
            }

            obs = std::move(next_obs);
            key = next_key;
        }

        result.log.push_back({ep, ep_return, state.steps_taken, eps,
                              loss_count ? loss_sum / loss_count : 0.0});
        if (ep % cfg.snapshot_interval == 0 || ep == cfg.episodes)
            result.snapshots.push_back(Snapshot{ep, config_hash, net});
    }
    return result;
}

}  // namespace oodrl
