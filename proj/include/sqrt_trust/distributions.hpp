#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "sqrt_trust/rng.hpp"

namespace sqrt_trust::distributions {

/// Diagonal Gaussian with a learnable, state-independent log standard deviation.
struct DiagGaussian {
    std::vector<double> mean;
    std::vector<double> log_std;

    std::size_t dim() const { return mean.size(); }
};

/// Categorical distribution over logits.size() outcomes.
struct Categorical {
    std::vector<double> logits;

    std::size_t size() const { return logits.size(); }
};

/// Gradient of a log-density. For a Gaussian, `first` is d/d mean and
/// `second` is d/d log_std; for a categorical, `first` is d/d logits and
/// `second` is empty.
struct ParamGrad {
    std::vector<double> first;
    std::vector<double> second;
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

/// Continuous actions are vectors; a categorical action is a one-element
/// vector holding the outcome index.
double log_prob(const DiagGaussian& dist, std::span<const double> action);
double log_prob(const Categorical& dist, std::size_t index);
double log_prob(const Categorical& dist, std::span<const double> action);

double entropy(const DiagGaussian& dist);
double entropy(const Categorical& dist);

std::vector<double> sample(const DiagGaussian& dist, Rng& rng);
std::size_t sample(const Categorical& dist, Rng& rng);

ParamGrad log_prob_grad(const DiagGaussian& dist, std::span<const double> action);
ParamGrad log_prob_grad(const Categorical& dist, std::size_t index);

/// d entropy / d logits.
std::vector<double> entropy_grad(const Categorical& dist);

std::size_t argmax(const Categorical& dist);

using ActionDistribution = std::variant<DiagGaussian, Categorical>;

double log_prob(const ActionDistribution& dist, std::span<const double> action);
double entropy(const ActionDistribution& dist);
/// Draws an action in the flat-vector encoding described above.
std::vector<double> sample(const ActionDistribution& dist, Rng& rng);
/// Mean for Gaussians, argmax for categoricals.
std::vector<double> mode(const ActionDistribution& dist);

}  // namespace sqrt_trust::distributions
