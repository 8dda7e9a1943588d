#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "saferl/neural.hpp"
#include "saferl/rng.hpp"

#include <cmath>
#include <stdexcept>

using namespace saferl::nn;

namespace {

Mlp q_net(std::uint64_t seed) { return mlp_init({12, 64, 64, 5}, seed); }

std::vector<BatchItem> random_batch(std::size_t n, std::uint64_t seed) {
    saferl::Rng rng(seed);
    std::vector<BatchItem> batch(n);
    for (auto& item : batch) {
        item.x.resize(12);
        for (double& v : item.x) v = rng.uniform(-1.0, 1.0);
        item.action = static_cast<int>(rng.uniform_index(5));
        item.target = rng.uniform(-3.0, 3.0);
    }
    return batch;
}

} // namespace

TEST_CASE("init is deterministic and respects the fan bound") {
    const auto a = q_net(42);
    const auto b = q_net(42);
    const auto c = q_net(43);
    CHECK(a.param_count() == 5317);
    REQUIRE(a.weights.size() == 3);
    CHECK(a.weights == b.weights);
    CHECK(a.weights != c.weights);
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        const double bound = std::sqrt(6.0 / (a.dims[l] + a.dims[l + 1]));
        for (double w : a.weights[l]) {
            CHECK(std::fabs(w) <= bound);
        }
        for (double bias : a.biases[l]) CHECK(bias == 0.0);
    }
    CHECK_THROWS_AS(mlp_init({12}, 1), std::invalid_argument);
    CHECK_THROWS_AS(mlp_init({12, 0, 5}, 1), std::invalid_argument);
}

TEST_CASE("forward basics") {
    auto net = q_net(7);
    for (auto& layer : net.weights) {
        for (double& w : layer) w = 0.0;
    }
    const auto zero_out = forward(net, std::vector<double>(12, 0.7));
    for (double v : zero_out) CHECK(v == 0.0);

    Mlp ident;
    ident.dims = {3, 3};
    ident.weights = {{1, 0, 0, 0, 1, 0, 0, 0, 1}};
    ident.biases = {{0, 0, 0}};
    const auto echoed = forward(ident, {0.25, -4.0, 9.5});
    CHECK(echoed == std::vector<double>{0.25, -4.0, 9.5});

    CHECK_THROWS_AS(forward(ident, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("forward matches a hand-computed two-layer pass") {
    Mlp net;
    net.dims = {2, 2, 2};
    net.weights = {{1.0, 2.0, -1.0, 0.5}, {2.0, -1.0, 0.25, 1.0}};
    net.biases = {{0.5, -1.0}, {0.1, 0.2}};
    // x=[1,1]: z1=[3.5,-1.5], relu=[3.5,0], out=[2*3.5+0.1, 0.25*3.5+0.2].
    const auto out = forward(net, {1.0, 1.0});
    REQUIRE(out.size() == 2);
    CHECK(out[0] == doctest::Approx(7.1).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(1.075).epsilon(1e-15));
}

TEST_CASE("perfect targets give zero loss and zero gradients") {
    const auto net = q_net(11);
    auto batch = random_batch(8, 99);
    for (auto& item : batch) {
        item.target = forward(net, item.x)[static_cast<std::size_t>(item.action)];
    }
    const auto g = loss_and_grads(net, batch);
    CHECK(g.loss == 0.0);
    for (const auto& layer : g.d_weights) {
        for (double v : layer) CHECK(v == 0.0);
    }
    for (const auto& layer : g.d_biases) {
        for (double v : layer) CHECK(v == 0.0);
    }
    CHECK_THROWS_AS(loss_and_grads(net, {}), std::invalid_argument);
}

TEST_CASE("analytic gradients agree with central differences") {
    const auto net = q_net(2024);
    const auto batch = random_batch(16, 515);
    const auto rep = grad_check(net, batch, 1e-5, 1e-4);
    INFO("max relative error ", rep.max_rel_error);
    CHECK(rep.passed);
    CHECK(rep.loss == doctest::Approx(batch_loss(net, batch)).epsilon(1e-12));
}

TEST_CASE("duplicating a batch item leaves the mean gradient unchanged") {
    const auto net = q_net(5);
    const auto single = random_batch(1, 31);
    std::vector<BatchItem> tripled = {single[0], single[0], single[0]};
    const auto g1 = loss_and_grads(net, single);
    const auto g3 = loss_and_grads(net, tripled);
    CHECK(g1.loss == doctest::Approx(g3.loss).epsilon(1e-12));
    for (std::size_t l = 0; l < g1.d_weights.size(); ++l) {
        for (std::size_t i = 0; i < g1.d_weights[l].size(); ++i) {
            CHECK(g1.d_weights[l][i] == doctest::Approx(g3.d_weights[l][i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("adam ignores zero gradients but still ticks") {
    auto net = q_net(3);
    const auto saved = net;
    auto adam = AdamState::for_net(net, 1e-4);
    GradBundle zero;
    zero.d_weights.assign(net.weights.size(), {});
    zero.d_biases.assign(net.biases.size(), {});
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        zero.d_weights[l].assign(net.weights[l].size(), 0.0);
        zero.d_biases[l].assign(net.biases[l].size(), 0.0);
    }
    adam_step(net, adam, zero);
    CHECK(adam.t == 1);
    CHECK(net.weights == saved.weights);
    CHECK(net.biases == saved.biases);
}

TEST_CASE("first adam step moves each parameter by about alpha against the gradient") {
    auto net = q_net(4);
    const auto saved = net;
    auto adam = AdamState::for_net(net, 1e-4);
    GradBundle g;
    g.d_weights.resize(net.weights.size());
    g.d_biases.resize(net.biases.size());
    saferl::Rng rng(88);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        g.d_weights[l].resize(net.weights[l].size());
        for (double& v : g.d_weights[l]) v = rng.uniform(-2.0, 2.0);
        g.d_biases[l].resize(net.biases[l].size());
        for (double& v : g.d_biases[l]) v = rng.uniform(-2.0, 2.0);
    }
    adam_step(net, adam, g);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (std::size_t i = 0; i < net.weights[l].size(); ++i) {
            const double delta = net.weights[l][i] - saved.weights[l][i];
            const double grad = g.d_weights[l][i];
            if (std::fabs(grad) > 1e-3) {
                CHECK(delta == doctest::Approx(-1e-4 * (grad > 0 ? 1.0 : -1.0)).epsilon(1e-4));
            }
        }
    }
}

TEST_CASE("adam is stateful: two steps differ from one double step") {
    auto run = [](int steps, double scale) {
        auto net = mlp_init({2, 3, 2}, 9);
        auto adam = AdamState::for_net(net, 1e-2);
        const std::vector<BatchItem> batch = {{{0.5, -0.3}, 1, 2.0}};
        for (int i = 0; i < steps; ++i) {
            auto g = loss_and_grads(net, batch);
            for (auto& layer : g.d_weights) {
                for (double& v : layer) v *= scale;
            }
            for (auto& layer : g.d_biases) {
                for (double& v : layer) v *= scale;
            }
            adam_step(net, adam, g);
        }
        return net;
    };
    const auto twice = run(2, 1.0);
    const auto once_double = run(1, 2.0);
    CHECK(twice.weights != once_double.weights);
}

TEST_CASE("training a few adam steps reduces the loss") {
    auto net = mlp_init({12, 64, 64, 5}, 77);
    auto adam = AdamState::for_net(net, 1e-2);
    const auto batch = random_batch(16, 101);
    const double before = batch_loss(net, batch);
    for (int i = 0; i < 200; ++i) {
        adam_step(net, adam, loss_and_grads(net, batch));
    }
    CHECK(batch_loss(net, batch) < 0.1 * before);
}

TEST_CASE("serialization round-trips bit-exactly") {
    const auto net = q_net(123);
    const auto blob = serialize(net);
    const auto back = deserialize(blob);
    CHECK(back.dims == net.dims);
    CHECK(back.weights == net.weights);
    CHECK(back.biases == net.biases);

    const auto x = random_batch(1, 6)[0].x;
    CHECK(forward(back, x) == forward(net, x));

    CHECK_THROWS_AS(deserialize(blob.substr(0, blob.size() / 2)), std::runtime_error);
    CHECK_THROWS_AS(deserialize("{}"), std::runtime_error);
    CHECK_THROWS_AS(deserialize(R"({"dims":[2,2],"weights":[[1,2,3]],"biases":[[0,0]]})"),
                    std::runtime_error);
}

TEST_CASE("output layer scales linearly when its bias is zero") {
    auto net = q_net(31);
    auto scaled = net;
    const double c = 3.75;
    for (double& w : scaled.weights.back()) w *= c;
    const auto x = random_batch(1, 61)[0].x;
    const auto base = forward(net, x);
    const auto out = forward(scaled, x);
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(out[i] == doctest::Approx(c * base[i]).epsilon(1e-12));
    }
}
