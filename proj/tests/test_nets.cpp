#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "sqrt_trust/nets.hpp"
#include "sqrt_trust/verify.hpp"

using namespace sqrt_trust;
using namespace sqrt_trust::nets;

TEST_SUITE("nets") {

TEST_CASE("forward examples") {
    Mlp zero({3, 5, 2});
    CHECK(zero.forward(std::vector<double>{1, -2, 3}) == std::vector<double>{0, 0});

    Mlp identity({3, 3});
    auto w = identity.weights(0);
    for (std::size_t k = 0; k < 3; ++k) w[k * 3 + k] = 1.0;
    CHECK(identity.forward(std::vector<double>{0.5, -1, 2}) == std::vector<double>{0.5, -1, 2});

    // 1-2-1: h = tanh(w1 x + b1), y = w2 . h + b2
    Mlp net({1, 2, 1});
    net.weights(0)[0] = 0.5;
    net.weights(0)[1] = -1.0;
    net.biases(0)[0] = 0.1;
    net.biases(0)[1] = 0.2;
    net.weights(1)[0] = 2.0;
    net.weights(1)[1] = 3.0;
    net.biases(1)[0] = -0.5;
    const double x = 0.8;
    const double expected = 2.0 * std::tanh(0.5 * x + 0.1) + 3.0 * std::tanh(-1.0 * x + 0.2) - 0.5;
    CHECK(net.forward(std::vector<double>{x})[0] == doctest::Approx(expected).epsilon(1e-15));

    CHECK_THROWS_AS(net.forward(std::vector<double>{1, 2}), std::invalid_argument);
}

TEST_CASE("batched forward equals single-row forward bit for bit") {
    Rng rng(1);
    const auto net = Mlp::glorot({4, 16, 16, 3}, rng);
    const std::size_t rows = 11;
    std::vector<double> inputs(rows * 4);
    for (auto& v : inputs) v = rng.uniform(-2, 2);
    Mlp::Workspace ws;
    const auto batched = net.forward_batch(inputs, rows, ws);
    const std::vector<double> copy(batched.begin(), batched.end());
    for (std::size_t s = 0; s < rows; ++s) {
        const auto single = net.forward(std::span<const double>(inputs).subspan(s * 4, 4));
        for (std::size_t j = 0; j < 3; ++j) CHECK(single[j] == copy[s * 3 + j]);
    }
}

TEST_CASE("backward examples and errors") {
    Rng rng(2);
    const auto net = Mlp::glorot({3, 4, 2}, rng);
    const std::vector<double> input{0.1, 0.2, 0.3};
    const auto zero = net.backward(input, std::vector<double>{0, 0});
    CHECK(std::all_of(zero.begin(), zero.end(), [](double g) { return g == 0.0; }));

    Mlp linear({3, 2});
    const std::vector<double> g{1.5, -2.0};
    const auto grad = linear.backward(input, g);
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t j = 0; j < 2; ++j) CHECK(grad[k * 2 + j] == doctest::Approx(input[k] * g[j]));
    CHECK(grad[6] == doctest::Approx(1.5));
    CHECK(grad[7] == doctest::Approx(-2.0));

    CHECK_THROWS_AS(net.backward(input, std::vector<double>{1}), std::invalid_argument);
    CHECK_THROWS_AS(net.backward(std::vector<double>{1}, std::vector<double>{1, 1}), std::invalid_argument);
}

TEST_CASE("backward matches finite differences on random networks") {
    Rng rng(3);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        std::vector<std::size_t> dims{1 + rng.uniform_index(16)};
        const std::size_t hidden = 1 + rng.uniform_index(2);
        for (std::size_t l = 0; l < hidden; ++l) dims.push_back(1 + rng.uniform_index(16));
        dims.push_back(1 + rng.uniform_index(4));
        if (i == 0) dims = {4, 8, 8, 2};
        auto net = Mlp::glorot(dims, rng);
        for (auto& p : net.params()) p += 0.05 * rng.normal();
        std::vector<double> x(dims.front()), g(dims.back());
        for (auto& v : x) v = rng.uniform(-1, 1);
        for (auto& v : g) v = rng.normal();
        const auto analytic = net.backward(x, g);
        const auto numeric = verify::numeric_gradient(
            [&](const std::vector<double>& p) {
                Mlp probe = net;
                std::copy(p.begin(), p.end(), probe.params().begin());
                const auto y = probe.forward(x);
                return std::inner_product(y.begin(), y.end(), g.begin(), 0.0);
            },
            {net.params().begin(), net.params().end()});
        for (std::size_t j = 0; j < numeric.size(); ++j) worst = std::max(worst, verify::relative_error(analytic[j], numeric[j]));
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("batched backward sums per-row gradients") {
    Rng rng(4);
    const auto net = Mlp::glorot({3, 8, 2}, rng);
    const std::size_t rows = 7;
    std::vector<double> x(rows * 3), g(rows * 2);
    for (auto& v : x) v = rng.uniform(-1, 1);
    for (auto& v : g) v = rng.normal();
    Mlp::Workspace ws;
    net.forward_batch(x, rows, ws);
    std::vector<double> batched(net.parameter_count(), 0.0);
    net.backward(ws, g, batched);
    std::vector<double> summed(net.parameter_count(), 0.0);
    for (std::size_t s = 0; s < rows; ++s) {
        const auto one = net.backward(std::span<const double>(x).subspan(s * 3, 3), std::span<const double>(g).subspan(s * 2, 2));
        for (std::size_t j = 0; j < one.size(); ++j) summed[j] += one[j];
    }
    for (std::size_t j = 0; j < summed.size(); ++j) CHECK(batched[j] == doctest::Approx(summed[j]).epsilon(1e-12));
}

TEST_CASE("glorot initialization is seeded and bounded") {
    Rng a(5), b(5);
    const auto n1 = Mlp::glorot({4, 64, 64, 2}, a, 0.01);
    const auto n2 = Mlp::glorot({4, 64, 64, 2}, b, 0.01);
    CHECK(n1 == n2);
    auto copy = n1;
    const double limit0 = std::sqrt(6.0 / 68.0);
    for (double w : copy.weights(0)) CHECK(std::abs(w) <= limit0);
    const double limit2 = 0.01 * std::sqrt(6.0 / 66.0);
    for (double w : copy.weights(2)) CHECK(std::abs(w) <= limit2);
    for (std::size_t l = 0; l < 3; ++l)
        for (double bias : copy.biases(l)) CHECK(bias == 0.0);
}

TEST_CASE("adam_step") {
    AdamState zero(2, 0.1);
    std::vector<double> p{1.0, -2.0};
    adam_step(zero, p, std::vector<double>{0, 0});
    CHECK(p == std::vector<double>{1.0, -2.0});
    CHECK(zero.step == 1);

    AdamState first(3, 1e-3);
    std::vector<double> q{0, 0, 0};
    adam_step(first, q, std::vector<double>{0.5, -3.0, 1e-4});
    CHECK(q[0] == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(q[1] == doctest::Approx(1e-3).epsilon(1e-6));
    CHECK(q[2] == doctest::Approx(-1e-3).epsilon(1e-3));

    // f(w) = w^2 / 2 decreases after one step from w = 1.
    AdamState s(1, 0.1);
    std::vector<double> w{1.0};
    adam_step(s, w, std::vector<double>{w[0]});
    CHECK(0.5 * w[0] * w[0] < 0.5);

    std::vector<double> wrong{1.0, 2.0};
    CHECK_THROWS_AS(adam_step(s, wrong, std::vector<double>{1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(adam_step(s, w, std::vector<double>{1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("clip_grad_norm") {
    std::vector<double> g{3, 4};
    CHECK(clip_grad_norm(g, 1.0) == doctest::Approx(5.0));
    CHECK(l2_norm(g) == doctest::Approx(1.0));
    std::vector<double> small{0.1, 0.1};
    clip_grad_norm(small, 1.0);
    CHECK(small == std::vector<double>{0.1, 0.1});
}

TEST_CASE("snapshot round trip") {
    Rng rng(6);
    const auto net = Mlp::glorot({3, 5, 2}, rng);
    const std::vector<double> extra{-0.5, 0.25};
    std::stringstream buf;
    save_snapshot(buf, net, extra);
    const auto snap = load_snapshot(buf);
    CHECK(snap.net == net);
    CHECK(snap.extra == extra);

    std::stringstream truncated(buf.str().substr(0, buf.str().size() - 3));
    CHECK_THROWS(load_snapshot(truncated));
    std::stringstream bad("{\"format\":\"other\"}\n");
    CHECK_THROWS(load_snapshot(bad));
}

}
