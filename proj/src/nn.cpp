#include "oodrl/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace oodrl {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

LayerParams make_layer(int in_dim, int out_dim, Rng& rng) {
    LayerParams layer;
    layer.in_dim = in_dim;
    layer.out_dim = out_dim;
    layer.w.resize(static_cast<size_t>(in_dim) * out_dim);
    layer.b.assign(out_dim, 0.0);
    const double scale = std::sqrt(2.0 / in_dim);
    for (auto& w : layer.w) w = scale * rng.normal();
    return layer;
}

LayerGrads zero_grads(const LayerParams& layer) {
    return {std::vector<double>(layer.w.size(), 0.0), std::vector<double>(layer.b.size(), 0.0)};
}

void linear_forward(const LayerParams& layer, std::span<const double> x, std::vector<double>& y) {
    if (static_cast<int>(x.size()) != layer.in_dim)
        throw std::invalid_argument("linear_forward: input size " + std::to_string(x.size()) +
                                    " != in_dim " + std::to_string(layer.in_dim));
    y.assign(layer.b.begin(), layer.b.end());
    const double* w = layer.w.data();
    for (int o = 0; o < layer.out_dim; ++o) {
        const double* row = w + static_cast<size_t>(o) * layer.in_dim;
        double acc = 0.0;
        for (int i = 0; i < layer.in_dim; ++i) acc += row[i] * x[i];
        y[o] += acc;
    }
}

void linear_backward(const LayerParams& layer, std::span<const double> x,
                     std::span<const double> y_grad, LayerGrads& grads,
                     std::vector<double>& x_grad) {
    if (static_cast<int>(y_grad.size()) != layer.out_dim)
        throw std::invalid_argument("linear_backward: gradient size mismatch");
    x_grad.assign(layer.in_dim, 0.0);
    const double* w = layer.w.data();
    for (int o = 0; o < layer.out_dim; ++o) {
        const double g = y_grad[o];
        grads.b[o] += g;
        if (g == 0.0) continue;
        const double* row = w + static_cast<size_t>(o) * layer.in_dim;
        double* wg = grads.w.data() + static_cast<size_t>(o) * layer.in_dim;
        for (int i = 0; i < layer.in_dim; ++i) {
            wg[i] += g * x[i];
            x_grad[i] += row[i] * g;
        }
    }
}

void relu_inplace(std::vector<double>& v) {
    for (auto& x : v)
        if (x < 0.0) x = 0.0;
}

void relu_backward_inplace(std::span<const double> post, std::vector<double>& grad) {
    for (size_t i = 0; i < grad.size(); ++i)
        if (post[i] <= 0.0) grad[i] = 0.0;
}

std::vector<double> dropout_apply(std::span<const double> x, double keep_prob, Rng& rng) {
    if (!(keep_prob > 0.0) || keep_prob > 1.0)
        throw std::invalid_argument("dropout_apply: keep_prob must be in (0,1]");
    std::vector<double> out(x.size());
    const double inv = 1.0 / keep_prob;
    for (size_t i = 0; i < x.size(); ++i)
        out[i] = rng.bernoulli(keep_prob) ? x[i] * inv : 0.0;
    return out;
}

double concrete_relax(double drop_logit, double temperature, double u) {
    if (!(temperature > 0.0)) throw std::invalid_argument("concrete_relax: temperature <= 0");
    // log p - log(1-p) == drop_logit when p = sigmoid(drop_logit)
    return sigmoid((drop_logit + std::log(u) - std::log(1.0 - u)) / temperature);
}

GateNoise sample_gate_noise(const GateConfig& gate, int dim, Rng& rng) {
    GateNoise noise;
    switch (gate.kind) {
        case GateKind::none:
            break;
        case GateKind::fixed_dropout:
            noise.mask.resize(dim);
            for (auto& m : noise.mask) m = rng.bernoulli(gate.keep_prob) ? 1 : 0;
            break;
        case GateKind::concrete_dropout:
            noise.u.resize(dim);
            for (auto& u : noise.u) u = rng.uniform_open();
            break;
    }
    return noise;
}

GateRecord gate_from_noise(const GateConfig& gate, GateNoise noise) {
    GateRecord rec;
    switch (gate.kind) {
        case GateKind::none:
            break;
        case GateKind::fixed_dropout: {
            if (!(gate.keep_prob > 0.0) || gate.keep_prob > 1.0)
                throw std::invalid_argument("gate_from_noise: keep_prob must be in (0,1]");
            const double inv = 1.0 / gate.keep_prob;
            rec.retain.resize(noise.mask.size());
            for (size_t i = 0; i < noise.mask.size(); ++i)
                rec.retain[i] = noise.mask[i] ? inv : 0.0;
            break;
        }
        case GateKind::concrete_dropout: {
            const double p = gate.drop_prob();
            rec.retain.resize(noise.u.size());
            rec.z.resize(noise.u.size());
            for (size_t i = 0; i < noise.u.size(); ++i) {
                const double z = concrete_relax(gate.drop_logit, gate.temperature, noise.u[i]);
                rec.z[i] = z;
                rec.retain[i] = (1.0 - z) / (1.0 - p);
            }
            break;
        }
    }
    rec.noise = std::move(noise);
    return rec;
}

void gate_forward(const GateRecord& rec, std::span<const double> x, std::vector<double>& out) {
    if (rec.retain.empty()) {
        out.assign(x.begin(), x.end());
        return;
    }
    if (rec.retain.size() != x.size())
        throw std::invalid_argument("gate_forward: retain/input size mismatch");
    out.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] * rec.retain[i];
}

double gate_backward(const GateConfig& gate, const GateRecord& rec, std::span<const double> x,
                     std::span<const double> out_grad, std::vector<double>& x_grad) {
    x_grad.resize(out_grad.size());
    if (rec.retain.empty()) {
        x_grad.assign(out_grad.begin(), out_grad.end());
        return 0.0;
    }
    for (size_t i = 0; i < out_grad.size(); ++i) x_grad[i] = out_grad[i] * rec.retain[i];
    if (gate.kind != GateKind::concrete_dropout) return 0.0;
    const double p = gate.drop_prob();
    double d_logit = 0.0;
    for (size_t i = 0; i < out_grad.size(); ++i) {
        const double z = rec.z[i];
        // d retain / d drop_logit, with retain = (1-z)/(1-p)
        const double dr = -z * (1.0 - z) / (gate.temperature * (1.0 - p)) +
                          (1.0 - z) * p / (1.0 - p);
        d_logit += out_grad[i] * x[i] * dr;
    }
    return d_logit;
}

double gaussian_nll(double mean, double log_var, double target) {
    if (!std::isfinite(mean) || !std::isfinite(log_var) || !std::isfinite(target))
        throw std::invalid_argument("gaussian_nll: non-finite input");
    const double e = target - mean;
    return 0.5 * log_var + 0.5 * e * e * std::exp(-log_var) +
           0.5 * std::log(2.0 * 3.141592653589793238);
}

void gaussian_nll_grad(double mean, double log_var, double target, double& d_mean,
                       double& d_log_var) {
    const double e = mean - target;
    const double inv_var = std::exp(-log_var);
    d_mean = e * inv_var;
    d_log_var = 0.5 - 0.5 * e * e * inv_var;
}

AdamState make_adam_state(const std::vector<std::span<double>>& params) {
    AdamState state;
    for (const auto& p : params) {
        state.m.emplace_back(p.size(), 0.0);
        state.v.emplace_back(p.size(), 0.0);
    }
    return state;
}

void adam_step(const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, AdamState& state,
               const AdamHyper& hyper) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
    for (size_t k = 0; k < params.size(); ++k) {
        if (params[k].size() != grads[k].size() || params[k].size() != state.m[k].size())
            throw std::invalid_argument("adam_step: shape mismatch in group " + std::to_string(k));
        for (double g : grads[k])
            if (!std::isfinite(g)) throw std::runtime_error("adam_step: non-finite gradient");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
    for (size_t k = 0; k < params.size(); ++k) {
        auto& m = state.m[k];
        auto& v = state.v[k];
        auto p = params[k];
        auto g = grads[k];
        for (size_t i = 0; i < p.size(); ++i) {
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
        }
    }
}

Mlp make_mlp(const std::vector<int>& dims, Rng& rng, bool final_linear) {
    if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least two dims");
    Mlp net;
    net.final_linear = final_linear;
    for (size_t i = 0; i + 1 < dims.size(); ++i) {
        net.layers.push_back(make_layer(dims[i], dims[i + 1], rng));
        net.gates.push_back(GateConfig{});
    }
    return net;
}

static MlpActs mlp_forward_impl(const Mlp& net, std::span<const double> input,
                                std::vector<GateRecord> gate_recs) {
    MlpActs acts;
    const size_t n = net.layers.size();
    acts.gate_in.resize(n);
    acts.gated.resize(n);
    acts.post.resize(n);
    acts.gate_rec = std::move(gate_recs);
    std::vector<double> cur(input.begin(), input.end());
    for (size_t l = 0; l < n; ++l) {
        acts.gate_in[l] = cur;
        gate_forward(acts.gate_rec[l], acts.gate_in[l], acts.gated[l]);
        linear_forward(net.layers[l], acts.gated[l], acts.post[l]);
        const bool last = (l + 1 == n);
        if (!last || !net.final_linear) relu_inplace(acts.post[l]);
        cur = acts.post[l];
    }
    return acts;
}

MlpActs mlp_forward(const Mlp& net, std::span<const double> input, Mode mode, Rng* rng) {
    std::vector<GateRecord> recs(net.layers.size());
    if (mode == Mode::train) {
        int dim = static_cast<int>(input.size());
        for (size_t l = 0; l < net.layers.size(); ++l) {
            if (net.gates[l].kind != GateKind::none) {
                if (rng == nullptr)
                    throw std::invalid_argument("mlp_forward: rng required for stochastic gates");
                recs[l] = gate_from_noise(net.gates[l], sample_gate_noise(net.gates[l], dim, *rng));
            }
            dim = net.layers[l].out_dim;
        }
    }
    return mlp_forward_impl(net, input, std::move(recs));
}

MlpActs mlp_forward_noise(const Mlp& net, std::span<const double> input,
                          const std::vector<GateNoise>& noise) {
    if (noise.size() != net.layers.size())
        throw std::invalid_argument("mlp_forward_noise: noise count mismatch");
    std::vector<GateRecord> recs(net.layers.size());
    for (size_t l = 0; l < net.layers.size(); ++l)
        recs[l] = gate_from_noise(net.gates[l], noise[l]);
    return mlp_forward_impl(net, input, std::move(recs));
}

MlpGrads mlp_backward(const Mlp& net, std::span<const double> input, const MlpActs& acts,
                      std::span<const double> out_grad) {
    const size_t n = net.layers.size();
    if (acts.post.size() != n || acts.post.back().size() != out_grad.size())
        throw std::invalid_argument("mlp_backward: activation record does not match network");
    MlpGrads grads;
    grads.drop_logit.assign(n, 0.0);
    for (const auto& layer : net.layers) grads.layers.push_back(zero_grads(layer));
    std::vector<double> grad(out_grad.begin(), out_grad.end());
    std::vector<double> gated_grad;
    for (size_t l = n; l-- > 0;) {
        const bool last = (l + 1 == n);
        if (!last || !net.final_linear) relu_backward_inplace(acts.post[l], grad);
        linear_backward(net.layers[l], acts.gated[l], grad, grads.layers[l], gated_grad);
        grads.drop_logit[l] =
            gate_backward(net.gates[l], acts.gate_rec[l], acts.gate_in[l], gated_grad, grad);
    }
    (void)input;
    return grads;
}

}  // namespace oodrl
