#include "oodrl/qnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace oodrl {

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::mcd: return "mcd";
        case ModelKind::mccd: return "mccd";
        case ModelKind::boot: return "boot";
        case ModelKind::bootp: return "bootp";
    }
    throw std::logic_error("model_kind_name: bad kind");
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "mcd") return ModelKind::mcd;
    if (name == "mccd") return ModelKind::mccd;
    if (name == "boot") return ModelKind::boot;
    if (name == "bootp") return ModelKind::bootp;
    throw std::invalid_argument("unknown model kind: " + name);
}

static double logit(double p) { return std::log(p / (1.0 - p)); }

QNet make_qnet(const ModelHyper& hyper, int input_dim, int n_actions, std::uint64_t seed) {
    if (hyper.mc_passes < 1) throw std::invalid_argument("make_qnet: mc_passes must be >= 1");
    if (hyper.is_ensemble() && hyper.heads < 2)
        throw std::invalid_argument("make_qnet: ensembles need at least 2 heads");
    if (hyper.beta < 0.0) throw std::invalid_argument("make_qnet: beta must be >= 0");

    Rng rng(Rng::derive(seed, 0x11));
    QNet net;
    net.hyper = hyper;
    net.input_dim = input_dim;
    net.n_actions = n_actions;
    net.trunk0 = make_layer(input_dim, 64, rng);
    net.trunk1 = make_layer(64, 64, rng);

    if (hyper.is_dropout()) {
        net.heads.push_back(make_layer(64, 2 * n_actions, rng));
        GateConfig gate;
        if (hyper.kind == ModelKind::mcd) {
            gate.kind = GateKind::fixed_dropout;
            gate.keep_prob = hyper.keep_prob;
        } else {
            gate.kind = GateKind::concrete_dropout;
            gate.drop_logit = logit(hyper.concrete_init_drop);
            gate.temperature = hyper.concrete_temperature;
        }
        net.gates = {gate, gate, gate};
    } else {
        for (int k = 0; k < hyper.heads; ++k) net.heads.push_back(make_layer(64, n_actions, rng));
        if (hyper.kind == ModelKind::bootp) {
            // independent seed stream for the frozen priors
            Rng prior_rng(Rng::derive(seed, 0x77));
            for (int k = 0; k < hyper.heads; ++k)
                net.priors.push_back(make_mlp({input_dim, 64, 64, n_actions}, prior_rng));
        }
    }
    return net;
}

QNetNoise sample_qnet_noise(const QNet& net, Rng& rng) {
    QNetNoise noise;
    const int dims[3] = {net.input_dim, 64, 64};
    for (int i = 0; i < 3; ++i) noise.gate[i] = sample_gate_noise(net.gates[i], dims[i], rng);
    return noise;
}

static QNetActs qnet_forward_impl(const QNet& net, std::span<const double> obs,
                                  std::array<GateRecord, 3> gate) {
    if (static_cast<int>(obs.size()) != net.input_dim)
        throw std::invalid_argument("qnet_forward: observation size mismatch");
    QNetActs acts;
    acts.input.assign(obs.begin(), obs.end());
    acts.gate = std::move(gate);
    gate_forward(acts.gate[0], acts.input, acts.g0);
    linear_forward(net.trunk0, acts.g0, acts.h1);
    relu_inplace(acts.h1);
    gate_forward(acts.gate[1], acts.h1, acts.g1);
    linear_forward(net.trunk1, acts.g1, acts.h2);
    relu_inplace(acts.h2);
    gate_forward(acts.gate[2], acts.h2, acts.g2);
    acts.head_out.resize(net.heads.size());
    for (size_t k = 0; k < net.heads.size(); ++k)
        linear_forward(net.heads[k], acts.g2, acts.head_out[k]);
    return acts;
}

QNetActs qnet_forward(const QNet& net, std::span<const double> obs, Mode mode, Rng* rng) {
    std::array<GateRecord, 3> recs{};
    if (mode == Mode::train) {
        bool stochastic = false;
        for (const auto& g : net.gates)
            if (g.kind != GateKind::none) stochastic = true;
        if (stochastic) {
            if (rng == nullptr)
                throw std::invalid_argument("qnet_forward: rng required in train mode");
            QNetNoise noise = sample_qnet_noise(net, *rng);
            for (int i = 0; i < 3; ++i)
                recs[i] = gate_from_noise(net.gates[i], std::move(noise.gate[i]));
        }
    }
    return qnet_forward_impl(net, obs, std::move(recs));
}

QNetActs qnet_forward_noise(const QNet& net, std::span<const double> obs, const QNetNoise& noise) {
    std::array<GateRecord, 3> recs{};
    for (int i = 0; i < 3; ++i) recs[i] = gate_from_noise(net.gates[i], noise.gate[i]);
    return qnet_forward_impl(net, obs, std::move(recs));
}

QNetGrads zero_qnet_grads(const QNet& net) {
    QNetGrads grads;
    grads.trunk0 = zero_grads(net.trunk0);
    grads.trunk1 = zero_grads(net.trunk1);
    for (const auto& head : net.heads) grads.heads.push_back(zero_grads(head));
    return grads;
}

void qnet_backward(const QNet& net, const QNetActs& acts,
                   const std::vector<std::vector<double>>& head_grads, QNetGrads& grads) {
    if (head_grads.size() != net.heads.size())
        throw std::invalid_argument("qnet_backward: head gradient count mismatch");
    if (acts.head_out.size() != net.heads.size() ||
        static_cast<int>(acts.input.size()) != net.input_dim)
        throw std::invalid_argument("qnet_backward: activation record does not match network");

    std::vector<double> g2_grad(acts.g2.size(), 0.0);
    std::vector<double> scratch;
    bool any = false;
    for (size_t k = 0; k < net.heads.size(); ++k) {
        if (head_grads[k].empty()) continue;
        any = true;
        linear_backward(net.heads[k], acts.g2, head_grads[k], grads.heads[k], scratch);
        for (size_t i = 0; i < g2_grad.size(); ++i) g2_grad[i] += scratch[i];
    }
    if (!any) return;

    std::vector<double> h2_grad, h1_grad, g1_grad, g0_grad, in_grad;
    grads.gate_logit[2] += gate_backward(net.gates[2], acts.gate[2], acts.h2, g2_grad, h2_grad);
    relu_backward_inplace(acts.h2, h2_grad);
    linear_backward(net.trunk1, acts.g1, h2_grad, grads.trunk1, g1_grad);
    grads.gate_logit[1] += gate_backward(net.gates[1], acts.gate[1], acts.h1, g1_grad, h1_grad);
    relu_backward_inplace(acts.h1, h1_grad);
    linear_backward(net.trunk0, acts.g0, h1_grad, grads.trunk0, g0_grad);
    grads.gate_logit[0] += gate_backward(net.gates[0], acts.gate[0], acts.input, g0_grad, in_grad);
}

std::vector<std::span<double>> qnet_param_spans(QNet& net) {
    std::vector<std::span<double>> spans;
    spans.emplace_back(net.trunk0.w);
    spans.emplace_back(net.trunk0.b);
    spans.emplace_back(net.trunk1.w);
    spans.emplace_back(net.trunk1.b);
    for (auto& head : net.heads) {
        spans.emplace_back(head.w);
        spans.emplace_back(head.b);
    }
    if (net.hyper.kind == ModelKind::mccd)
        for (auto& gate : net.gates) spans.emplace_back(&gate.drop_logit, 1);
    return spans;
}

std::vector<std::span<const double>> qnet_grad_spans(const QNetGrads& grads, const QNet& net) {
    std::vector<std::span<const double>> spans;
    spans.emplace_back(grads.trunk0.w);
    spans.emplace_back(grads.trunk0.b);
    spans.emplace_back(grads.trunk1.w);
    spans.emplace_back(grads.trunk1.b);
    for (const auto& head : grads.heads) {
        spans.emplace_back(head.w);
        spans.emplace_back(head.b);
    }
    if (net.hyper.kind == ModelKind::mccd)
        for (int i = 0; i < 3; ++i) spans.emplace_back(&grads.gate_logit[i], 1);
    return spans;
}

double clamp_log_var(double log_var) { return std::clamp(log_var, kLogVarMin, kLogVarMax); }

double epistemic_variance(std::span<const double> samples) {
    if (samples.empty()) throw std::invalid_argument("epistemic_variance: empty sample list");
    double sum = 0.0, sum_sq = 0.0;
    for (double y : samples) {
        sum += y;
        sum_sq += y * y;
    }
    const double n = static_cast<double>(samples.size());
    const double mean = sum / n;
    return std::max(0.0, sum_sq / n - mean * mean);
}

double prior_combine(double head_out, double prior_out, double beta) {
    return head_out + beta * prior_out;
}

McPrediction mc_predict(const QNet& net, std::span<const double> obs, Rng& rng) {
    if (!net.hyper.is_dropout())
        throw std::invalid_argument("mc_predict: requires a dropout-kind network");
    const int A = net.n_actions;
    const int T = net.hyper.mc_passes;
    McPrediction pred;
    pred.mu_samples.resize(T);
    std::vector<std::vector<double>> var_samples(T);
    for (int t = 0; t < T; ++t) {
        QNetActs acts = qnet_forward(net, obs, Mode::train, &rng);
        const auto& out = acts.head_out[0];
        pred.mu_samples[t].assign(out.begin(), out.begin() + A);
        var_samples[t].resize(A);
        for (int a = 0; a < A; ++a) var_samples[t][a] = std::exp(clamp_log_var(out[A + a]));
    }
    pred.q.mean_q.resize(A);
    pred.q.epistemic_var.resize(A);
    pred.q.aleatoric_var.resize(A);
    std::vector<double> column(T);
    for (int a = 0; a < A; ++a) {
        double mu_sum = 0.0, var_sum = 0.0;
        for (int t = 0; t < T; ++t) {
            column[t] = pred.mu_samples[t][a];
            mu_sum += column[t];
            var_sum += var_samples[t][a];
        }
        pred.q.mean_q[a] = mu_sum / T;
        pred.q.epistemic_var[a] = epistemic_variance(column);
        pred.q.aleatoric_var[a] = var_sum / T;
    }
    return pred;
}

std::vector<double> prior_q_values(const QNet& net, std::span<const double> obs) {
    std::vector<double> values;
    values.reserve(net.priors.size() * net.n_actions);
    for (const auto& prior : net.priors) {
        MlpActs acts = mlp_forward(prior, obs, Mode::eval, nullptr);
        values.insert(values.end(), acts.output().begin(), acts.output().end());
    }
    return values;
}

const std::vector<double>* cached_prior_q(const QNet& net, std::span<const double> obs,
                                          long long key, PriorCache* cache) {
    if (net.priors.empty()) return nullptr;
    if (cache == nullptr) return nullptr;
    auto it = cache->find(key);
    if (it == cache->end()) it = cache->emplace(key, prior_q_values(net, obs)).first;
    return &it->second;
}

EnsemblePrediction ensemble_predict(const QNet& net, std::span<const double> obs,
                                    const std::vector<double>* prior_q) {
    if (!net.hyper.is_ensemble())
        throw std::invalid_argument("ensemble_predict: requires an ensemble-kind network");
    const int A = net.n_actions;
    const int K = static_cast<int>(net.heads.size());
    std::vector<double> local_prior;
    if (net.hyper.kind == ModelKind::bootp && prior_q == nullptr) {
        local_prior = prior_q_values(net, obs);
        prior_q = &local_prior;
    }
    QNetActs acts = qnet_forward(net, obs, Mode::eval, nullptr);
    EnsemblePrediction pred;
    pred.head_q.resize(K);
    for (int k = 0; k < K; ++k) {
        pred.head_q[k] = acts.head_out[k];
        if (net.hyper.kind == ModelKind::bootp)
            for (int a = 0; a < A; ++a)
                pred.head_q[k][a] =
                    prior_combine(pred.head_q[k][a], (*prior_q)[k * A + a], net.hyper.beta);
    }
    pred.q.mean_q.resize(A);
    pred.q.epistemic_var.resize(A);
    std::vector<double> column(K);
    for (int a = 0; a < A; ++a) {
        double sum = 0.0;
        for (int k = 0; k < K; ++k) {
            column[k] = pred.head_q[k][a];
            sum += column[k];
        }
        pred.q.mean_q[a] = sum / K;
        pred.q.epistemic_var[a] = epistemic_variance(column);
    }
    return pred;
}

// --------------------------- snapshot format -------------------------------

namespace {

constexpr char kMagic[8] = {'O', 'O', 'D', 'R', 'L', 'S', 'N', '1'};

struct Writer {
    std::vector<std::uint8_t> bytes;
    void raw(const void* p, size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes.insert(bytes.end(), b, b + n);
    }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void i32(std::int32_t v) { raw(&v, 4); }
    void i64(std::int64_t v) { raw(&v, 8); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void vec(const std::vector<double>& v) {
        i64(static_cast<std::int64_t>(v.size()));
        raw(v.data(), v.size() * sizeof(double));
    }
};

struct Reader {
    std::span<const std::uint8_t> bytes;
    size_t pos = 0;
    void raw(void* p, size_t n) {
        if (pos + n > bytes.size()) throw std::runtime_error("snapshot: truncated");
        std::memcpy(p, bytes.data() + pos, n);
        pos += n;
    }
    std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
    std::int32_t i32() { std::int32_t v; raw(&v, 4); return v; }
    std::int64_t i64() { std::int64_t v; raw(&v, 8); return v; }
    std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
    double f64() { double v; raw(&v, 8); return v; }
    std::vector<double> vec() {
        const auto n = static_cast<size_t>(i64());
        if (n > (1u << 26)) throw std::runtime_error("snapshot: implausible array size");
        std::vector<double> v(n);
        raw(v.data(), n * sizeof(double));
        return v;
    }
};

void write_layer(Writer& w, const LayerParams& layer) {
    w.i32(layer.in_dim);
    w.i32(layer.out_dim);
    w.vec(layer.w);
    w.vec(layer.b);
}

LayerParams read_layer(Reader& r) {
    LayerParams layer;
    layer.in_dim = r.i32();
    layer.out_dim = r.i32();
    layer.w = r.vec();
    layer.b = r.vec();
    if (layer.w.size() != static_cast<size_t>(layer.in_dim) * layer.out_dim ||
        layer.b.size() != static_cast<size_t>(layer.out_dim))
        throw std::runtime_error("snapshot: inconsistent layer dims");
    return layer;
}

void write_gate(Writer& w, const GateConfig& gate) {
    w.u8(static_cast<std::uint8_t>(gate.kind));
    w.f64(gate.keep_prob);
    w.f64(gate.drop_logit);
    w.f64(gate.temperature);
}

GateConfig read_gate(Reader& r) {
    GateConfig gate;
    gate.kind = static_cast<GateKind>(r.u8());
    gate.keep_prob = r.f64();
    gate.drop_logit = r.f64();
    gate.temperature = r.f64();
    return gate;
}

}  // namespace

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::uint8_t> serialize_snapshot(const Snapshot& snap) {
    const QNet& net = snap.net;
    Writer w;
    w.raw(kMagic, sizeof(kMagic));
    w.i64(snap.episode);
    w.u64(snap.config_hash);
    w.u8(static_cast<std::uint8_t>(net.hyper.kind));
    w.i32(net.input_dim);
    w.i32(net.n_actions);
    w.i32(net.hyper.mc_passes);
    w.i32(net.hyper.heads);
    w.f64(net.hyper.beta);
    w.f64(net.hyper.keep_prob);
    w.f64(net.hyper.concrete_temperature);
    w.f64(net.hyper.concrete_init_drop);
    w.f64(net.hyper.lambda_w);
    w.f64(net.hyper.lambda_d);
    for (const auto& gate : net.gates) write_gate(w, gate);
    write_layer(w, net.trunk0);
    write_layer(w, net.trunk1);
    w.i32(static_cast<std::int32_t>(net.heads.size()));
    for (const auto& head : net.heads) write_layer(w, head);
    w.i32(static_cast<std::int32_t>(net.priors.size()));
    for (const auto& prior : net.priors) {
        w.i32(static_cast<std::int32_t>(prior.layers.size()));
        for (const auto& layer : prior.layers) write_layer(w, layer);
    }
    w.u64(fnv1a(w.bytes));
    return std::move(w.bytes);
}

Snapshot deserialize_snapshot(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof(kMagic) + 8) throw std::runtime_error("snapshot: too short");
    std::uint64_t file_hash;
    std::memcpy(&file_hash, bytes.data() + bytes.size() - 8, 8);
    const std::uint64_t computed = fnv1a(bytes.subspan(0, bytes.size() - 8));
    if (computed != file_hash) throw std::runtime_error("snapshot: content hash mismatch");

    Reader r{bytes.subspan(0, bytes.size() - 8)};
    char magic[8];
    r.raw(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("snapshot: bad magic");
    Snapshot snap;
    snap.episode = r.i64();
    snap.config_hash = r.u64();
    QNet& net = snap.net;
    net.hyper.kind = static_cast<ModelKind>(r.u8());
    net.input_dim = r.i32();
    net.n_actions = r.i32();
    net.hyper.mc_passes = r.i32();
    net.hyper.heads = r.i32();
    net.hyper.beta = r.f64();
    net.hyper.keep_prob = r.f64();
    net.hyper.concrete_temperature = r.f64();
    net.hyper.concrete_init_drop = r.f64();
    net.hyper.lambda_w = r.f64();
    net.hyper.lambda_d = r.f64();
    for (auto& gate : net.gates) gate = read_gate(r);
    net.trunk0 = read_layer(r);
    net.trunk1 = read_layer(r);
    const int n_heads = r.i32();
    for (int k = 0; k < n_heads; ++k) net.heads.push_back(read_layer(r));
    const int n_priors = r.i32();
    for (int k = 0; k < n_priors; ++k) {
        Mlp prior;
        const int n_layers = r.i32();
        for (int l = 0; l < n_layers; ++l) {
            prior.layers.push_back(read_layer(r));
            prior.gates.push_back(GateConfig{});
        }
        net.priors.push_back(std::move(prior));
    }
    return snap;
}

std::uint64_t snapshot_content_hash(const Snapshot& snap) {
    const auto bytes = serialize_snapshot(snap);
    return fnv1a(std::span(bytes).subspan(0, bytes.size() - 8));
}

void save_snapshot(const Snapshot& snap, const std::string& path) {
    const auto bytes = serialize_snapshot(snap);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_snapshot: cannot open " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("save_snapshot: write failed for " + path);
}

Snapshot load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_snapshot: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_snapshot(bytes);
}

}  // namespace oodrl
