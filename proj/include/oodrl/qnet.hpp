#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "oodrl/nn.hpp"

namespace oodrl {

enum class ModelKind { mcd, mccd, boot, bootp };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

struct ModelHyper {
    ModelKind kind = ModelKind::boot;
    int mc_passes = 10;   // T, dropout kinds
    int heads = 10;       // K, ensemble kinds
    double beta = 1.0;    // prior scale, bootp
    double keep_prob = 0.95;
    double concrete_temperature = 0.1;
    double concrete_init_drop = 0.1;
    double lambda_w = 1e-6;  // concrete weight-regularizer scale
    double lambda_d = 1e-5;  // concrete entropy-regularizer scale

    bool is_dropout() const { return kind == ModelKind::mcd || kind == ModelKind::mccd; }
    bool is_ensemble() const { return kind == ModelKind::boot || kind == ModelKind::bootp; }
};

// Two shared 64-unit hidden layers. Dropout kinds: one head with 2 outputs
// per action (mu, log variance); gates before each of the three weight
// layers. Ensemble kinds: K linear heads with one output per action; bootp
// adds one frozen prior MLP per head.
struct QNet {
    ModelHyper hyper;
    int input_dim = 0;
    int n_actions = 0;
    LayerParams trunk0, trunk1;
    std::array<GateConfig, 3> gates{};
    std::vector<LayerParams> heads;
    std::vector<Mlp> priors;  // bootp only; never trained
};

QNet make_qnet(const ModelHyper& hyper, int input_dim, int n_actions, std::uint64_t seed);

struct QNetNoise {
    std::array<GateNoise, 3> gate;
};

struct QNetActs {
    std::vector<double> input;
    std::array<GateRecord, 3> gate;
    std::vector<double> g0, h1, g1, h2, g2;
    std::vector<std::vector<double>> head_out;
};

struct QNetGrads {
    LayerGrads trunk0, trunk1;
    std::vector<LayerGrads> heads;
    std::array<double, 3> gate_logit{};
};

QNetNoise sample_qnet_noise(const QNet& net, Rng& rng);
QNetActs qnet_forward(const QNet& net, std::span<const double> obs, Mode mode, Rng* rng);
QNetActs qnet_forward_noise(const QNet& net, std::span<const double> obs, const QNetNoise& noise);
QNetGrads zero_qnet_grads(const QNet& net);
// head_grads[k] may be empty to skip head k entirely
void qnet_backward(const QNet& net, const QNetActs& acts,
                   const std::vector<std::vector<double>>& head_grads, QNetGrads& grads);

// Trainable parameter views in a fixed order (trunk, heads, concrete gate
// logits). Prior parameters are deliberately absent.
std::vector<std::span<double>> qnet_param_spans(QNet& net);
std::vector<std::span<const double>> qnet_grad_spans(const QNetGrads& grads, const QNet& net);

double clamp_log_var(double log_var);

// Population variance in the one-pass moment form: mean of squares minus
// squared mean, floored at zero against rounding.
double epistemic_variance(std::span<const double> samples);

double prior_combine(double head_out, double prior_out, double beta);

struct UncertainQ {
    std::vector<double> mean_q;
    std::vector<double> epistemic_var;
    std::vector<double> aleatoric_var;  // empty for ensemble kinds
};

struct McPrediction {
    UncertainQ q;
    std::vector<std::vector<double>> mu_samples;  // [pass][action]
};

// T stochastic passes with gates active.
McPrediction mc_predict(const QNet& net, std::span<const double> obs, Rng& rng);

// Frozen prior head values for one observation, laid out [head*n_actions+a].
std::vector<double> prior_q_values(const QNet& net, std::span<const double> obs);

// Keyed by a caller-chosen state key; valid for the lifetime of the net's
// priors (they never change).
using PriorCache = std::unordered_map<long long, std::vector<double>>;
const std::vector<double>* cached_prior_q(const QNet& net, std::span<const double> obs,
                                          long long key, PriorCache* cache);

struct EnsemblePrediction {
    UncertainQ q;
    std::vector<std::vector<double>> head_q;  // [head][action], prior term included
};

// One deterministic pass; prior_q may be null (computed on the fly for bootp).
EnsemblePrediction ensemble_predict(const QNet& net, std::span<const double> obs,
                                    const std::vector<double>* prior_q = nullptr);

// ---------------------------------------------------------------------------
// Snapshot serialization: versioned binary with an architecture header and a
// trailing FNV-1a content hash.

struct Snapshot {
    long long episode = 0;
    std::uint64_t config_hash = 0;
    QNet net;
};

std::vector<std::uint8_t> serialize_snapshot(const Snapshot& snap);
Snapshot deserialize_snapshot(std::span<const std::uint8_t> bytes);  // throws on bad hash
std::uint64_t snapshot_content_hash(const Snapshot& snap);
void save_snapshot(const Snapshot& snap, const std::string& path);
Snapshot load_snapshot(const std::string& path);

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace oodrl
