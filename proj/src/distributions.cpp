#include "sqrt_trust/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sqrt_trust::distributions {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

std::size_t action_index(const Categorical& dist, std::span<const double> action) {
    if (action.size() != 1) throw std::invalid_argument("categorical action must have one element");
    const double raw = action[0];
    if (!(raw >= 0.0) || raw != std::floor(raw) || raw >= static_cast<double>(dist.size()))
        throw std::invalid_argument("categorical action index out of range");
    return static_cast<std::size_t>(raw);
}

double log_sum_exp(std::span<const double> logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - peak);
    return peak + std::log(sum);
}

}  // namespace

std::vector<double> log_softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("log_softmax of empty logits");
    const double lse = log_sum_exp(logits);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

std::vector<double> softmax(std::span<const double> logits) {
    auto out = log_softmax(logits);
    for (double& v : out) v = std::exp(v);
    return out;
}

double log_prob(const DiagGaussian& dist, std::span<const double> action) {
    if (action.size() != dist.dim() || dist.log_std.size() != dist.dim())
        throw std::invalid_argument("DiagGaussian::log_prob: dimension mismatch");
    double lp = 0.0;
    for (std::size_t i = 0; i < dist.dim(); ++i) {
        const double z = (action[i] - dist.mean[i]) * std::exp(-dist.log_std[i]);
        lp += -0.5 * z * z - dist.log_std[i] - kHalfLog2Pi;
    }
    return lp;
}

double log_prob(const Categorical& dist, std::size_t index) {
    if (index >= dist.size()) throw std::invalid_argument("Categorical::log_prob: index out of range");
    return dist.logits[index] - log_sum_exp(dist.logits);
}

double log_prob(const Categorical& dist, std::span<const double> action) {
    return log_prob(dist, action_index(dist, action));
}

double entropy(const DiagGaussian& dist) {
    double h = 0.0;
    for (double ls : dist.log_std) h += 0.5 + kHalfLog2Pi + ls;
    return h;
}

double entropy(const Categorical& dist) {
    const auto logp = log_softmax(dist.logits);
    double h = 0.0;
    for (double lp : logp)
        if (lp > -745.0) h -= std::exp(lp) * lp;
    return h;
}

std::vector<double> sample(const DiagGaussian& dist, Rng& rng) {
    std::vector<double> a(dist.dim());
    for (std::size_t i = 0; i < dist.dim(); ++i)
        a[i] = dist.mean[i] + std::exp(dist.log_std[i]) * rng.normal();
    return a;
}

std::size_t sample(const Categorical& dist, Rng& rng) {
    const auto p = softmax(dist.logits);
    const double u = rng.uniform();
    double cumulative = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        cumulative += p[i];
        if (u < cumulative) return i;
    }
    // Rounding left u above the total mass; fall back to the last non-zero outcome.
    for (std::size_t i = p.size(); i-- > 0;)
        if (p[i] > 0.0) return i;
    return p.size() - 1;
}

ParamGrad log_prob_grad(const DiagGaussian& dist, std::span<const double> action) {
    if (action.size() != dist.dim()) throw std::invalid_argument("DiagGaussian::log_prob_grad: dimension mismatch");
    ParamGrad g{std::vector<double>(dist.dim()), std::vector<double>(dist.dim())};
    for (std::size_t i = 0; i < dist.dim(); ++i) {
        const double inv_std = std::exp(-dist.log_std[i]);
        const double z = (action[i] - dist.mean[i]) * inv_std;
        g.first[i] = z * inv_std;
        g.second[i] = z * z - 1.0;
    }
    return g;
}

ParamGrad log_prob_grad(const Categorical& dist, std::size_t index) {
    if (index >= dist.size()) throw std::invalid_argument("Categorical::log_prob_grad: index out of range");
    auto p = softmax(dist.logits);
    for (double& v : p) v = -v;
    p[index] += 1.0;
    return {std::move(p), {}};
}

std::vector<double> entropy_grad(const Categorical& dist) {
    // dH/dl_j = -p_j (log p_j + H)
    const auto logp = log_softmax(dist.logits);
    double h = 0.0;
    for (double lp : logp)
        if (lp > -745.0) h -= std::exp(lp) * lp;
    std::vector<double> g(logp.size());
    for (std::size_t j = 0; j < logp.size(); ++j) {
        const double p = std::exp(logp[j]);
        g[j] = p > 0.0 ? -p * (logp[j] + h) : 0.0;
    }
    return g;
}

std::size_t argmax(const Categorical& dist) {
    return static_cast<std::size_t>(
        std::distance(dist.logits.begin(), std::max_element(dist.logits.begin(), dist.logits.end())));
}

double log_prob(const ActionDistribution& dist, std::span<const double> action) {
    return std::visit([&](const auto& d) { return log_prob(d, action); }, dist);
}

double entropy(const ActionDistribution& dist) {
    return std::visit([](const auto& d) { return entropy(d); }, dist);
}

std::vector<double> sample(const ActionDistribution& dist, Rng& rng) {
    if (const auto* g = std::get_if<DiagGaussian>(&dist)) return sample(*g, rng);
    return {static_cast<double>(sample(std::get<Categorical>(dist), rng))};
}

std::vector<double> mode(const ActionDistribution& dist) {
    if (const auto* g = std::get_if<DiagGaussian>(&dist)) return g->mean;
    return {static_cast<double>(argmax(std::get<Categorical>(dist)))};
}

}  // namespace sqrt_trust::distributions
