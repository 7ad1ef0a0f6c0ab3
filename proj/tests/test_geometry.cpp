#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sqrt_trust/geometry.hpp"
#include "sqrt_trust/rng.hpp"

using namespace sqrt_trust;
using namespace sqrt_trust::geometry;

namespace {

GaussianSpec g1(double mean, double std = 1.0) { return {{mean}, {std}}; }

double ulp_distance(double a, double b) {
    return std::abs(a - b) / (std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b)));
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("log_ratio examples and errors") {
    CHECK(log_ratio(-1.2, -1.2).delta == 0.0);
    CHECK(log_ratio(-1.0, -2.0).delta == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(log_ratio(std::log(0.5), std::log(0.25)).delta == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK_THROWS_AS(log_ratio(std::nan(""), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(log_ratio(0.0, -INFINITY), std::invalid_argument);
}

TEST_CASE("sqrt_ratio examples, overflow guard and r = q^2") {
    auto p = sqrt_ratio({0.0});
    CHECK(p.r == 1.0);
    CHECK(p.q == 1.0);
    p = sqrt_ratio({std::log(4.0)});
    CHECK(p.r == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(p.q == doctest::Approx(2.0).epsilon(1e-14));
    p = sqrt_ratio({2.0});
    CHECK(p.r == doctest::Approx(7.389056).epsilon(1e-6));
    CHECK(p.q == doctest::Approx(2.718282).epsilon(1e-6));
    CHECK_FALSE(p.overflow);

    const auto big = sqrt_ratio({1000.0});
    CHECK(big.overflow);
    CHECK(std::isfinite(big.r));
    CHECK(big.q == doctest::Approx(std::exp(kHalfLogRatioGuard)));
    const auto small = sqrt_ratio({-1000.0});
    CHECK(small.overflow);
    CHECK(small.q > 0.0);

    Rng rng(1);
    for (int i = 0; i < 10000; ++i) {
        const auto rq = sqrt_ratio({rng.uniform(-50, 50)});
        CHECK(ulp_distance(rq.r, rq.q * rq.q) <= 4.0);
    }
}

TEST_CASE("saturate_log_ratio") {
    CHECK(saturate_log_ratio({0.0}, 2.0).delta == 0.0);
    const double s = saturate_log_ratio({1e6}, 2.0).delta;
    CHECK(s <= 2.0);
    CHECK(2.0 - s < 1e-10);
    CHECK(saturate_log_ratio({2.0}, 2.0).delta == doctest::Approx(1.523188).epsilon(1e-6));
    CHECK(saturate_log_ratio({-2.0}, 2.0).delta == doctest::Approx(-1.523188).epsilon(1e-6));
    CHECK_THROWS_AS(saturate_log_ratio({1.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(saturate_log_ratio({1.0}, -1.0), std::invalid_argument);

    Rng rng(2);
    for (double c : {1.0, 2.0, 10.0})
        for (int i = 0; i < 10000; ++i) {
            const double d = saturate_log_ratio({rng.uniform(-1e6, 1e6)}, c).delta;
            CHECK(std::exp(d) <= std::exp(c));
            CHECK(std::exp(d / 2) <= std::exp(c / 2));
        }
}

TEST_CASE("clipped and square-root objectives") {
    CHECK(bppo_surrogate(1.5, 1.0, 0.2) == doctest::Approx(2.4));
    CHECK(bppo_surrogate(1.0, -3.0, 0.2) == doctest::Approx(-6.0));
    CHECK(bppo_surrogate(0.5, -1.0, 0.2) == doctest::Approx(-1.6));
    CHECK(ppo_surrogate(1.0, 2.0, 0.2) == doctest::Approx(2.0));
    CHECK(ppo_surrogate(2.0, 1.0, 0.2) == doctest::Approx(1.2));
    CHECK(ppo_surrogate(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
    CHECK(btrpo_objective(1.0, 0.7, 2.0) == doctest::Approx(1.4));
    CHECK(btrpo_objective(1.3, 0.0, 2.0) == doctest::Approx(-0.18));
    CHECK(btrpo_objective(0.8, 1.0, 2.0) == doctest::Approx(1.52));

    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double q = rng.uniform(0, 5), a = rng.uniform(-3, 3);
        CHECK(bppo_surrogate(q, a, 1e9) == doctest::Approx(2 * q * a));
        CHECK(ppo_surrogate(q * q, a, 1e9) == doctest::Approx(q * q * a));
    }
}

TEST_CASE("clip correspondence between q and r") {
    Rng rng(4);
    for (double eps : {0.1, 0.2, 0.5}) {
        const double lo = (1 - eps) * (1 - eps), hi = (1 + eps) * (1 + eps);
        for (int i = 0; i < 10000; ++i) {
            const double c = clip(rng.uniform(0, 10), 1 - eps, 1 + eps);
            CHECK(c * c >= lo);
            CHECK(c * c <= hi);
        }
    }
    CHECK(clip(0.0, 0.8, 1.2) * clip(0.0, 0.8, 1.2) == doctest::Approx(0.64).epsilon(1e-15));
    CHECK(clip(5.0, 0.8, 1.2) * clip(5.0, 0.8, 1.2) == doctest::Approx(1.44).epsilon(1e-15));
}

TEST_CASE("hellinger_penalty and bc_estimate") {
    CHECK(hellinger_penalty(std::vector<double>{1, 1, 1}) == 0.0);
    CHECK(hellinger_penalty(std::vector<double>{0.5, 1.5}) == doctest::Approx(0.25));
    CHECK(hellinger_penalty(std::vector<double>{2}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(hellinger_penalty(std::vector<double>{}), std::invalid_argument);

    CHECK(bc_estimate(std::vector<double>{1, 1, 1, 1}) == 1.0);
    CHECK(bc_estimate(std::vector<double>{0.9, 1.1}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(bc_estimate(std::vector<double>{}), std::invalid_argument);

    // Monte-Carlo BC between N(0,1) and N(1,1) is exp(-1/8).
    Rng rng(5);
    const std::size_t n = 100000;
    std::vector<double> q(n);
    double sum_sq = 0.0;
    for (auto& v : q) {
        const double x = rng.normal();
        v = std::exp(0.5 * (x - 0.5));  // sqrt of N(x;1,1)/N(x;0,1)
        sum_sq += v * v;
    }
    const double est = bc_estimate(q);
    const double se = std::sqrt((sum_sq / n - est * est) / n);
    CHECK(std::abs(est - std::exp(-0.125)) <= 3 * se);
}

TEST_CASE("divergence_penalty examples") {
    for (auto kind : {RegularizerKind::kl_forward, RegularizerKind::kl_reverse, RegularizerKind::chi2,
                      RegularizerKind::js, RegularizerKind::jeffreys, RegularizerKind::bc})
        CHECK(divergence_penalty(kind, std::vector<double>{1, 1}, std::vector<double>{0, 0}) ==
              doctest::Approx(0.0).epsilon(1e-15));
    CHECK(divergence_penalty(RegularizerKind::chi2, std::vector<double>{2, 0.5},
                             std::vector<double>{std::log(2.0), -std::log(2.0)}) == doctest::Approx(0.625));
    CHECK(divergence_penalty(RegularizerKind::bc, std::vector<double>{4}, std::vector<double>{std::log(4.0)}) ==
          doctest::Approx(-1.0));
    CHECK_THROWS_AS(divergence_penalty(RegularizerKind::none, std::vector<double>{1}, std::vector<double>{0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(divergence_penalty(RegularizerKind::kl_forward, std::vector<double>{}, std::vector<double>{}),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_regularizer("hamming"), std::invalid_argument);
    CHECK(parse_regularizer("kl") == RegularizerKind::kl_forward);
    CHECK(parse_regularizer(to_string(RegularizerKind::jeffreys)) == RegularizerKind::jeffreys);
}

TEST_CASE("divergence derivatives match finite differences") {
    Rng rng(6);
    for (auto kind : {RegularizerKind::kl_forward, RegularizerKind::kl_reverse, RegularizerKind::chi2,
                      RegularizerKind::js, RegularizerKind::jeffreys, RegularizerKind::bc})
        for (int i = 0; i < 100; ++i) {
            const double d = rng.uniform(-2, 2), h = 1e-6;
            const auto term = [&](double x) { return divergence_term(kind, std::exp(x), x); };
            const double fd = (term(d + h) - term(d - h)) / (2 * h);
            CHECK(dlog::divergence_term(kind, std::exp(d), d) == doctest::Approx(fd).epsilon(1e-6));
        }
}

TEST_CASE("Gaussian oracles") {
    CHECK(gaussian_bc(g1(0.3, 0.7), g1(0.3, 0.7)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(gaussian_bc(g1(0), g1(2)) == doctest::Approx(0.606531).epsilon(1e-6));
    CHECK(gaussian_bc(g1(0), g1(0.2)) == doctest::Approx(0.995012).epsilon(1e-6));
    CHECK(std::abs(gaussian_bc(g1(0), g1(2)) - gaussian_bc_quadrature(0, 1, 2, 1)) < 1e-8);
    CHECK(std::abs(gaussian_bc(g1(0), g1(0.2)) - gaussian_bc_quadrature(0, 1, 0.2, 1)) < 1e-8);
    CHECK(std::abs(gaussian_bc(g1(-1, 0.5), g1(1, 2)) - gaussian_bc_quadrature(-1, 0.5, 1, 2)) < 1e-8);

    CHECK(gaussian_kl(g1(0.4, 1.3), g1(0.4, 1.3)) == doctest::Approx(0.0));
    CHECK(gaussian_kl(g1(0), g1(1)) == doctest::Approx(0.5));
    CHECK(gaussian_kl(g1(0), g1(0.2)) == doctest::Approx(0.02));

    const GaussianSpec two{{0, 0}, {1, 1}};
    CHECK_THROWS_AS(gaussian_bc(two, g1(0)), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_kl(two, g1(0)), std::invalid_argument);

    // Diagonal Gaussians factorize.
    const GaussianSpec a{{0, 1}, {1, 2}}, b{{0.5, 0}, {1.5, 1}};
    CHECK(gaussian_bc(a, b) == doctest::Approx(gaussian_bc(g1(0, 1), g1(0.5, 1.5)) * gaussian_bc(g1(1, 2), g1(0, 1))));
    CHECK(gaussian_kl(a, b) == doctest::Approx(gaussian_kl(g1(0, 1), g1(0.5, 1.5)) + gaussian_kl(g1(1, 2), g1(0, 1))));
}

TEST_CASE("BC-KL local equivalence") {
    double prev = INFINITY;
    for (double d : {0.2, 0.1, 0.05, 0.02, 0.01}) {
        const double kl = gaussian_kl(g1(0), g1(d));
        const double err = std::abs((1 - gaussian_bc(g1(0), g1(d))) - kl / 4);
        CHECK(err <= std::pow(kl, 1.5));
        CHECK(err / kl < prev);
        prev = err / kl;
    }
}

TEST_CASE("tail_bound and taylor_residual") {
    CHECK(tail_bound(4, 0.95) == doctest::Approx(0.1));
    CHECK(tail_bound(9, 1.0) == 0.0);
    CHECK(tail_bound(2.25, 0.9) == doctest::Approx(0.8));
    CHECK_THROWS_AS(tail_bound(1.0, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(tail_bound(0.5, 0.9), std::invalid_argument);

    CHECK(taylor_residual(1.0) == 0.0);
    CHECK(taylor_residual(2.0) == doctest::Approx(1.0));
    CHECK(taylor_residual(0.7) == doctest::Approx(0.09));
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double q = rng.uniform(0, 10);
        CHECK(std::abs(taylor_residual(q) - (q - 1) * (q - 1)) <= 1e-12);
    }
}

TEST_CASE("quadrature integrates a Gaussian density to one") {
    const double mean = 0.3, sd = 0.8;
    const double mass = integrate(
        [&](double x) { return std::exp(-0.5 * (x - mean) * (x - mean) / (sd * sd)) / (sd * std::sqrt(2 * M_PI)); },
        mean - 12 * sd, mean + 12 * sd);
    CHECK(std::abs(mass - 1.0) <= 1e-8);
}

TEST_CASE("SurrogateConfig validation") {
    SurrogateConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.beta = -1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.saturation_c = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

}
