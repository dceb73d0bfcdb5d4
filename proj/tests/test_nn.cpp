#include <doctest.h>

#include <cmath>

#include "oodrl/nn.hpp"

using namespace oodrl;

TEST_CASE("identity layer passes input through") {
    Mlp net;
    net.layers.push_back({2, 2, {1, 0, 0, 1}, {0, 0}});
    net.gates.push_back({});
    const std::vector<double> input{1, 2};
    const auto acts = mlp_forward(net, input, Mode::eval, nullptr);
    CHECK(acts.output()[0] == 1.0);
    CHECK(acts.output()[1] == 2.0);
}

TEST_CASE("zero weights output the bias") {
    Mlp net;
    net.layers.push_back({3, 2, std::vector<double>(6, 0.0), {0.5, -1.5}});
    net.gates.push_back({});
    const std::vector<double> input{9, -3, 7};
    const auto acts = mlp_forward(net, input, Mode::eval, nullptr);
    CHECK(acts.output()[0] == 0.5);
    CHECK(acts.output()[1] == -1.5);
}

TEST_CASE("two-layer relu net matches a straight-line recomputation") {
    Mlp net;
    net.layers.push_back({2, 2, {1.0, -2.0, 0.5, 3.0}, {0.1, -0.2}});
    net.layers.push_back({2, 1, {2.0, -1.0}, {0.3}});
    net.gates.resize(2);
    const std::vector<double> input{0.7, -0.4};
    const auto acts = mlp_forward(net, input, Mode::eval, nullptr);

    // independent straight-line arithmetic
    const double h0 = std::max(0.0, 1.0 * 0.7 + (-2.0) * (-0.4) + 0.1);
    const double h1 = std::max(0.0, 0.5 * 0.7 + 3.0 * (-0.4) + (-0.2));
    const double expected = 2.0 * h0 + (-1.0) * h1 + 0.3;
    CHECK(acts.output()[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("forward rejects dimension mismatch") {
    Mlp net;
    net.layers.push_back({2, 1, {1, 1}, {0}});
    net.gates.push_back({});
    const std::vector<double> input{1, 2, 3};
    CHECK_THROWS(mlp_forward(net, input, Mode::eval, nullptr));
}

TEST_CASE("scalar chain rule") {
    // L = yhat^2, yhat = w*x, w=1, x=2 -> dL/dw = 2*yhat*x = 8
    Mlp net;
    net.layers.push_back({1, 1, {1.0}, {0.0}});
    net.gates.push_back({});
    const std::vector<double> input{2.0};
    const auto acts = mlp_forward(net, input, Mode::eval, nullptr);
    const double yhat = acts.output()[0];
    const std::vector<double> out_grad{2.0 * yhat};
    const auto grads = mlp_backward(net, input, acts, out_grad);
    CHECK(grads.layers[0].w[0] == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("zero output gradient gives zero parameter gradients") {
    Rng rng(7);
    Mlp net = make_mlp({3, 4, 2}, rng);
    const std::vector<double> input{0.5, -1.0, 2.0};
    const auto acts = mlp_forward(net, input, Mode::eval, nullptr);
    const auto grads = mlp_backward(net, input, acts, std::vector<double>{0.0, 0.0});
    for (const auto& lg : grads.layers) {
        for (double g : lg.w) CHECK(g == 0.0);
        for (double g : lg.b) CHECK(g == 0.0);
    }
}

namespace {

double mlp_scalar_loss(const Mlp& net, const std::vector<double>& input,
                       const std::vector<GateNoise>& noise) {
    const auto acts = mlp_forward_noise(net, input, noise);
    double loss = 0.0;
    for (double y : acts.output()) loss += y * y;
    return loss;
}

void check_mlp_fd(Mlp& net, const std::vector<double>& input,
                  const std::vector<GateNoise>& noise) {
    const auto acts = mlp_forward_noise(net, input, noise);
    std::vector<double> out_grad(acts.output().size());
    for (size_t i = 0; i < out_grad.size(); ++i) out_grad[i] = 2.0 * acts.output()[i];
    const auto grads = mlp_backward(net, input, acts, out_grad);

    const double eps = 1e-5;
    auto check_param = [&](double& p, double analytic) {
        const double save = p;
        p = save + eps;
        const double up = mlp_scalar_loss(net, input, noise);
        p = save - eps;
        const double down = mlp_scalar_loss(net, input, noise);
        p = save;
        const double fd = (up - down) / (2.0 * eps);
        const double denom = std::max({std::fabs(fd), std::fabs(analytic), 1e-8});
        CHECK(std::fabs(fd - analytic) / denom < 1e-4);
    };
    for (size_t l = 0; l < net.layers.size(); ++l) {
        for (size_t i = 0; i < net.layers[l].w.size(); ++i)
            check_param(net.layers[l].w[i], grads.layers[l].w[i]);
        for (size_t i = 0; i < net.layers[l].b.size(); ++i)
            check_param(net.layers[l].b[i], grads.layers[l].b[i]);
        if (net.gates[l].kind == GateKind::concrete_dropout)
            check_param(net.gates[l].drop_logit, grads.drop_logit[l]);
    }
}

}  // namespace

TEST_CASE("gradients match central finite differences") {
    Rng rng(11);
    std::vector<double> input{0.3, -0.7, 1.2, 0.05};

    SUBCASE("plain") {
        Mlp net = make_mlp({4, 5, 3}, rng);
        check_mlp_fd(net, input, std::vector<GateNoise>(2));
    }
    SUBCASE("fixed dropout with frozen masks") {
        Mlp net = make_mlp({4, 5, 3}, rng);
        net.gates[0] = {GateKind::fixed_dropout, 0.8, 0.0, 0.1};
        net.gates[1] = {GateKind::fixed_dropout, 0.8, 0.0, 0.1};
        std::vector<GateNoise> noise;
        noise.push_back(sample_gate_noise(net.gates[0], 4, rng));
        noise.push_back(sample_gate_noise(net.gates[1], 5, rng));
        check_mlp_fd(net, input, noise);
    }
    SUBCASE("concrete dropout with frozen uniforms") {
        Mlp net = make_mlp({4, 5, 3}, rng);
        net.gates[0] = {GateKind::concrete_dropout, 1.0, -1.5, 0.3};
        net.gates[1] = {GateKind::concrete_dropout, 1.0, 0.4, 0.3};
        std::vector<GateNoise> noise;
        noise.push_back(sample_gate_noise(net.gates[0], 4, rng));
        noise.push_back(sample_gate_noise(net.gates[1], 5, rng));
        check_mlp_fd(net, input, noise);
    }
}

TEST_CASE("gaussian negative log-likelihood") {
    const double c = 0.5 * std::log(2.0 * 3.141592653589793238);
    CHECK(gaussian_nll(0, 0, 0) == doctest::Approx(c).epsilon(1e-12));
    CHECK(gaussian_nll(0, 0, 0) == doctest::Approx(0.918939).epsilon(1e-5));
    CHECK(gaussian_nll(0, 0, 1) == doctest::Approx(1.418939).epsilon(1e-5));
    CHECK_THROWS(gaussian_nll(std::nan(""), 0, 0));

    SUBCASE("batch loss equals the mean of per-element losses") {
        Rng rng(3);
        double batch = 0.0;
        std::vector<double> each;
        for (int i = 0; i < 16; ++i) {
            const double m = rng.normal(), lv = rng.normal(), t = rng.normal();
            each.push_back(gaussian_nll(m, lv, t));
        }
        for (double l : each) batch += l / 16.0;
        double oracle = 0.0;
        for (double l : each) oracle += l;
        oracle /= 16.0;
        CHECK(batch == doctest::Approx(oracle).epsilon(1e-12));
    }

    SUBCASE("minimized over log_var at log((target-mean)^2)") {
        const double mean = 0.3, target = 1.7;
        const double opt = std::log((target - mean) * (target - mean));
        const double at_opt = gaussian_nll(mean, opt, target);
        for (double lv = -6.0; lv <= 6.0; lv += 0.05)
            CHECK(gaussian_nll(mean, lv, target) >= at_opt - 1e-12);
    }
}

TEST_CASE("dropout_apply") {
    Rng rng(21);
    std::vector<double> v{1, -2, 3, 4.5};

    SUBCASE("keep_prob 1 is the identity") {
        CHECK(dropout_apply(v, 1.0, rng) == v);
    }
    SUBCASE("rejects invalid keep_prob") {
        CHECK_THROWS(dropout_apply(v, 0.0, rng));
        CHECK_THROWS(dropout_apply(v, 1.5, rng));
    }
    SUBCASE("empirical keep frequency near 0.95") {
        const int n = 100000;
        std::vector<double> ones{1.0};
        int kept = 0;
        for (int i = 0; i < n; ++i)
            if (dropout_apply(ones, 0.95, rng)[0] != 0.0) ++kept;
        const double freq = static_cast<double>(kept) / n;
        CHECK(freq >= 0.945);
        CHECK(freq <= 0.955);
    }
    SUBCASE("preserves elementwise expectation") {
        const int n = 100000;
        std::vector<double> sum(v.size(), 0.0);
        for (int i = 0; i < n; ++i) {
            const auto out = dropout_apply(v, 0.95, rng);
            for (size_t j = 0; j < v.size(); ++j) sum[j] += out[j];
        }
        for (size_t j = 0; j < v.size(); ++j)
            CHECK(std::fabs(sum[j] / n - v[j]) < 0.01 * std::fabs(v[j]));
    }
}

TEST_CASE("concrete gate relaxation") {
    // p = 0.5, u = 0.5: the sigmoid argument is exactly zero
    CHECK(concrete_relax(0.0, 0.1, 0.5) == 0.5);

    // p = 0.9, u = 0.5, low temperature saturates
    const double logit_09 = std::log(0.9 / 0.1);
    CHECK(concrete_relax(logit_09, 0.01, 0.5) > 0.999);

    SUBCASE("mean of z near p at temperature 0.1") {
        Rng rng(5);
        const double p = 0.3;
        const double logit_p = std::log(p / (1.0 - p));
        double sum = 0.0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) sum += concrete_relax(logit_p, 0.1, rng.uniform_open());
        CHECK(std::fabs(sum / n - p) < 0.02);
    }
    CHECK_THROWS(concrete_relax(0.0, 0.0, 0.5));
}

TEST_CASE("adam") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        std::vector<double> w{1.0, -2.0};
        std::vector<double> g{0.0, 0.0};
        std::vector<std::span<double>> params{w};
        AdamState state = make_adam_state(params);
        adam_step(params, {std::span<const double>(g)}, state, {});
        CHECK(w[0] == 1.0);
        CHECK(w[1] == -2.0);
    }
    SUBCASE("first step magnitude is about lr") {
        std::vector<double> w{0.0};
        std::vector<double> g{5.0};
        std::vector<std::span<double>> params{w};
        AdamState state = make_adam_state(params);
        adam_step(params, {std::span<const double>(g)}, state, {0.1, 0.9, 0.999, 1e-8});
        CHECK(std::fabs(w[0] + 0.1) < 1e-6);
    }
    SUBCASE("minimizes (w-3)^2 from 0 within 1000 steps") {
        std::vector<double> w{0.0};
        std::vector<std::span<double>> params{w};
        AdamState state = make_adam_state(params);
        for (int i = 0; i < 1000; ++i) {
            std::vector<double> g{2.0 * (w[0] - 3.0)};
            adam_step(params, {std::span<const double>(g)}, state, {0.1, 0.9, 0.999, 1e-8});
        }
        CHECK(std::fabs(w[0] - 3.0) < 1e-3);
    }
    SUBCASE("non-finite gradients are rejected") {
        std::vector<double> w{0.0};
        std::vector<double> g{std::nan("")};
        std::vector<std::span<double>> params{w};
        AdamState state = make_adam_state(params);
        CHECK_THROWS(adam_step(params, {std::span<const double>(g)}, state, {}));
    }
}

TEST_CASE("determinism: same seed, same call sequence, identical outputs") {
    auto run = [] {
        Rng rng(99);
        Mlp net = make_mlp({4, 8, 2}, rng);
        net.gates[0] = {GateKind::fixed_dropout, 0.7, 0.0, 0.1};
        std::vector<double> out;
        for (int i = 0; i < 10; ++i) {
            const std::vector<double> input{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
            const auto acts = mlp_forward(net, input, Mode::train, &rng);
            out.insert(out.end(), acts.output().begin(), acts.output().end());
        }
        return out;
    };
    CHECK(run() == run());
}
