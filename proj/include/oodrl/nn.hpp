#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oodrl/rng.hpp"

namespace oodrl {

struct LayerParams {
    int in_dim = 0;
    int out_dim = 0;
    std::vector<double> w;  // out_dim x in_dim, row-major
    std::vector<double> b;  // out_dim
};

struct LayerGrads {
    std::vector<double> w;
    std::vector<double> b;
};

enum class GateKind { none, fixed_dropout, concrete_dropout };

struct GateConfig {
    GateKind kind = GateKind::none;
    double keep_prob = 1.0;    // fixed_dropout: probability a unit stays active
    double drop_logit = 0.0;   // concrete_dropout: learnable, drop prob = sigmoid(drop_logit)
    double temperature = 0.1;  // concrete_dropout relaxation temperature

    double drop_prob() const { return 1.0 / (1.0 + std::exp(-drop_logit)); }
};

// Raw randomness consumed by one gate application. Stored in activation
// records so a forward pass can be replayed exactly (finite-difference
// checks perturb parameters while keeping the noise frozen).
struct GateNoise {
    std::vector<std::uint8_t> mask;  // fixed_dropout: 1 = kept
    std::vector<double> u;           // concrete_dropout: uniforms in (0,1)
};

// Per-unit retain factors plus the relaxed gate values needed for backward.
struct GateRecord {
    GateNoise noise;
    std::vector<double> retain;  // multiplier applied to each unit
    std::vector<double> z;       // concrete only: relaxed drop variables
};

double sigmoid(double x);

LayerParams make_layer(int in_dim, int out_dim, Rng& rng);  // scaled-normal fan-in, zero bias
LayerGrads zero_grads(const LayerParams& layer);

void linear_forward(const LayerParams& layer, std::span<const double> x, std::vector<double>& y);
// accumulates into grads; writes dL/dx into x_grad (sized in_dim, overwritten)
void linear_backward(const LayerParams& layer, std::span<const double> x,
                     std::span<const double> y_grad, LayerGrads& grads,
                     std::vector<double>& x_grad);

void relu_inplace(std::vector<double>& v);
// zeroes grad entries where the forward activation was clipped
void relu_backward_inplace(std::span<const double> post, std::vector<double>& grad);

// Inverted dropout: kept units scaled by 1/keep_prob. Throws if keep_prob
// is outside (0,1].
std::vector<double> dropout_apply(std::span<const double> x, double keep_prob, Rng& rng);

// Relaxed Bernoulli drop variable for one unit: with p = sigmoid(drop_logit),
// z = sigmoid((drop_logit + log u - log(1-u)) / temperature). The retain
// factor applied to the activation is (1-z)/(1-p).
double concrete_relax(double drop_logit, double temperature, double u);

GateNoise sample_gate_noise(const GateConfig& gate, int dim, Rng& rng);
GateRecord gate_from_noise(const GateConfig& gate, GateNoise noise);
// out = x * retain
void gate_forward(const GateRecord& rec, std::span<const double> x, std::vector<double>& out);
// propagates grad to x (overwrites x_grad) and returns dL/d drop_logit
// (zero for non-concrete gates)
double gate_backward(const GateConfig& gate, const GateRecord& rec, std::span<const double> x,
                     std::span<const double> out_grad, std::vector<double>& x_grad);

// 0.5*log_var + 0.5*(target-mean)^2*exp(-log_var) + 0.5*ln(2*pi)
double gaussian_nll(double mean, double log_var, double target);
void gaussian_nll_grad(double mean, double log_var, double target, double& d_mean,
                       double& d_log_var);

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

// Numerical guard for learned concrete-dropout logits: keeps drop
// probabilities inside (~0.007, ~0.993) so the relaxed gates never saturate
// into an effectively deterministic network.
inline constexpr double kDropLogitClamp = 5.0;

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Moment buffers laid out to match an arbitrary list of parameter spans.
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    long step = 0;
};

AdamState make_adam_state(const std::vector<std::span<double>>& params);
// Bias-corrected update applied in place. Throws on shape mismatch or
// non-finite gradients (the caller decides whether to skip the batch).
void adam_step(const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, AdamState& state,
               const AdamHyper& hyper);

// ---------------------------------------------------------------------------
// Generic gated MLP: gate i is applied to the input of layer i; ReLU on every
// layer except (optionally) the last. Used for prior networks and as the
// reference forward/backward pair in tests.

struct Mlp {
    std::vector<LayerParams> layers;
    std::vector<GateConfig> gates;  // same length as layers
    bool final_linear = true;
};

struct MlpActs {
    std::vector<std::vector<double>> gate_in;  // input of gate i
    std::vector<GateRecord> gate_rec;
    std::vector<std::vector<double>> gated;  // gate output = layer input
    std::vector<std::vector<double>> post;   // layer output after activation
    const std::vector<double>& output() const { return post.back(); }
};

struct MlpGrads {
    std::vector<LayerGrads> layers;
    std::vector<double> drop_logit;  // per gate, zero for non-concrete
};

enum class Mode { train, eval };

Mlp make_mlp(const std::vector<int>& dims, Rng& rng, bool final_linear = true);

// Eval mode ignores gates entirely (inverted scaling at train time makes the
// plain pass the correct expectation).
MlpActs mlp_forward(const Mlp& net, std::span<const double> input, Mode mode, Rng* rng);
MlpActs mlp_forward_noise(const Mlp& net, std::span<const double> input,
                          const std::vector<GateNoise>& noise);
MlpGrads mlp_backward(const Mlp& net, std::span<const double> input, const MlpActs& acts,
                      std::span<const double> out_grad);

}  // namespace oodrl
