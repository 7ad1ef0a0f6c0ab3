#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sqrt_trust/distributions.hpp"
#include "sqrt_trust/geometry.hpp"
#include "sqrt_trust/verify.hpp"

using namespace sqrt_trust;
using namespace sqrt_trust::distributions;

TEST_SUITE("distributions") {

TEST_CASE("log_prob examples") {
    CHECK(log_prob(DiagGaussian{{0}, {0}}, std::vector<double>{0}) == doctest::Approx(-0.918939).epsilon(1e-6));
    CHECK(log_prob(Categorical{{0, 0, 0, 0}}, 2) == doctest::Approx(-1.386294).epsilon(1e-6));
    CHECK(log_prob(DiagGaussian{{1}, {std::log(2.0)}}, std::vector<double>{3}) ==
          doctest::Approx(-2.112086).epsilon(1e-6));
    CHECK_THROWS_AS(log_prob(DiagGaussian{{0, 0}, {0, 0}}, std::vector<double>{0}), std::invalid_argument);
    CHECK_THROWS_AS(log_prob(Categorical{{0, 0}}, std::size_t{2}), std::invalid_argument);
}

TEST_CASE("entropy examples") {
    CHECK(entropy(DiagGaussian{{0}, {0}}) == doctest::Approx(1.418939).epsilon(1e-6));
    CHECK(entropy(Categorical{{0, 0, 0, 0}}) == doctest::Approx(1.386294).epsilon(1e-6));
    CHECK(entropy(Categorical{{0, -INFINITY, -INFINITY, -INFINITY}}) == doctest::Approx(0.0));
}

TEST_CASE("sampling") {
    Rng rng(1);
    std::size_t hits = 0;
    for (int i = 0; i < 1000; ++i) hits += sample(Categorical{{0, 0, 50, 0}}, rng) == 2;
    CHECK(hits == 1000);

    const auto a = sample(DiagGaussian{{5}, {std::log(1e-8)}}, rng);
    CHECK(std::abs(a[0] - 5.0) < 1e-6);

    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += sample(DiagGaussian{{1}, {0}}, rng)[0];
    CHECK(std::abs(sum / n - 1.0) <= 0.01);

    CHECK(mode(ActionDistribution{DiagGaussian{{0.25, -1}, {0, 0}}}) == std::vector<double>{0.25, -1});
    CHECK(mode(ActionDistribution{Categorical{{0, 3, 1}}}) == std::vector<double>{1});
}

TEST_CASE("sample and log_prob agree with entropy") {
    Rng rng(2);
    const DiagGaussian g{{0.5, -1}, {0.3, -0.7}};
    const Categorical c{{0.2, -1, 1.5, 0}};
    const int n = 100000;
    for (const ActionDistribution& d : {ActionDistribution{g}, ActionDistribution{c}}) {
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double lp = log_prob(d, sample(d, rng));
            sum += lp;
            sum_sq += lp * lp;
        }
        const double mean = sum / n;
        const double se = std::sqrt((sum_sq / n - mean * mean) / n);
        CHECK(std::abs(mean + entropy(d)) <= 3 * se);
    }
}

TEST_CASE("log_prob_grad examples") {
    const auto at_mean = log_prob_grad(DiagGaussian{{0.7}, {0.2}}, std::vector<double>{0.7});
    CHECK(at_mean.first[0] == 0.0);
    const auto g = log_prob_grad(DiagGaussian{{0}, {0}}, std::vector<double>{2});
    CHECK(g.first[0] == doctest::Approx(2.0));
    CHECK(g.second[0] == doctest::Approx(3.0));
    const auto c = log_prob_grad(Categorical{{0, 0}}, 0);
    CHECK(c.first[0] == doctest::Approx(0.5));
    CHECK(c.first[1] == doctest::Approx(-0.5));
}

TEST_CASE("log_prob_grad matches finite differences on 1000 random pairs") {
    Rng rng(3);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        if (i % 2 == 0) {
            const std::size_t dim = 1 + rng.uniform_index(3);
            DiagGaussian d{std::vector<double>(dim), std::vector<double>(dim)};
            std::vector<double> a(dim);
            for (std::size_t j = 0; j < dim; ++j) {
                d.mean[j] = rng.uniform(-2, 2);
                d.log_std[j] = rng.uniform(-1.5, 1);
                a[j] = d.mean[j] + std::exp(d.log_std[j]) * rng.normal();
            }
            const auto grad = log_prob_grad(d, a);
            for (std::size_t j = 0; j < dim; ++j) {
                auto up = d, down = d;
                up.mean[j] += 1e-5;
                down.mean[j] -= 1e-5;
                worst = std::max(worst, verify::relative_error(grad.first[j], (log_prob(up, a) - log_prob(down, a)) / 2e-5));
                up = d;
                down = d;
                up.log_std[j] += 1e-5;
                down.log_std[j] -= 1e-5;
                worst = std::max(worst, verify::relative_error(grad.second[j], (log_prob(up, a) - log_prob(down, a)) / 2e-5));
            }
        } else {
            const std::size_t n = 2 + rng.uniform_index(5);
            Categorical d{std::vector<double>(n)};
            for (auto& l : d.logits) l = rng.uniform(-3, 3);
            const std::size_t a = rng.uniform_index(n);
            const auto grad = log_prob_grad(d, a);
            for (std::size_t j = 0; j < n; ++j) {
                auto up = d, down = d;
                up.logits[j] += 1e-5;
                down.logits[j] -= 1e-5;
                worst = std::max(worst, verify::relative_error(grad.first[j], (log_prob(up, a) - log_prob(down, a)) / 2e-5));
            }
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("categorical is invariant to a logit shift") {
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        Categorical d{std::vector<double>(5)};
        for (auto& l : d.logits) l = rng.uniform(-4, 4);
        auto shifted = d;
        const double c = rng.uniform(-20, 20);
        for (auto& l : shifted.logits) l += c;
        CHECK(argmax(d) == argmax(shifted));
        for (std::size_t a = 0; a < 5; ++a) CHECK(std::abs(log_prob(d, a) - log_prob(shifted, a)) <= 1e-12);
    }
}

TEST_CASE("Gaussian density integrates to one") {
    const DiagGaussian d{{0.4}, {std::log(1.7)}};
    const double mass = geometry::integrate(
        [&](double x) { return std::exp(log_prob(d, std::vector<double>{x})); }, 0.4 - 12 * 1.7, 0.4 + 12 * 1.7);
    CHECK(std::abs(mass - 1.0) <= 1e-8);
}

TEST_CASE("entropy gradient matches finite differences") {
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        Categorical d{std::vector<double>(4)};
        for (auto& l : d.logits) l = rng.uniform(-3, 3);
        const auto grad = entropy_grad(d);
        for (std::size_t j = 0; j < 4; ++j) {
            auto up = d, down = d;
            up.logits[j] += 1e-5;
            down.logits[j] -= 1e-5;
            CHECK(verify::relative_error(grad[j], (entropy(up) - entropy(down)) / 2e-5) <= 1e-4);
        }
    }
}

}
