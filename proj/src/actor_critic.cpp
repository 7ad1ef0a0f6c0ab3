#include "sqrt_trust/actor_critic.hpp"

#include <algorithm>
#include <stdexcept>

namespace sqrt_trust {

ActorCritic ActorCritic::create(const envs::EnvSpec& spec, const std::vector<std::size_t>& hidden, Rng& rng,
                                bool scale_observations) {
    ActorCritic model;
    model.action_space = spec.action_space;
    if (scale_observations) {
        model.obs_low = spec.observation_low;
        model.obs_high = spec.observation_high;
    }
    const std::size_t out = spec.action_space.discrete ? spec.action_space.n : spec.action_space.dim;

    std::vector<std::size_t> policy_dims{spec.observation_dim};
    policy_dims.insert(policy_dims.end(), hidden.begin(), hidden.end());
    policy_dims.push_back(out);
    std::vector<std::size_t> value_dims(policy_dims);
    value_dims.back() = 1;

    model.policy = nets::Mlp::glorot(policy_dims, rng, 0.01);
    model.value = nets::Mlp::glorot(value_dims, rng, 1.0);
    if (!spec.action_space.discrete) model.log_std.assign(spec.action_space.dim, 0.0);
    return model;
}

std::vector<double> ActorCritic::preprocess(std::span<const double> observation) const {
    std::vector<double> x(observation.begin(), observation.end());
    if (obs_low.empty()) return x;
    if (x.size() != obs_low.size()) throw std::invalid_argument("observation dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = 2.0 * (x[i] - obs_low[i]) / (obs_high[i] - obs_low[i]) - 1.0;
    return x;
}

distributions::ActionDistribution ActorCritic::make_distribution(std::span<const double> policy_output) const {
    std::vector<double> out(policy_output.begin(), policy_output.end());
    if (action_space.discrete) return distributions::Categorical{std::move(out)};
    return distributions::DiagGaussian{std::move(out), log_std};
}

distributions::ActionDistribution ActorCritic::distribution(std::span<const double> observation) const {
    return make_distribution(policy.forward(preprocess(observation)));
}

double ActorCritic::state_value(std::span<const double> observation) const {
    return value.forward(preprocess(observation))[0];
}

std::size_t ActorCritic::parameter_count() const {
    return policy.parameter_count() + log_std.size() + value.parameter_count();
}

std::vector<double> ActorCritic::flat_params() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    flat.insert(flat.end(), policy.params().begin(), policy.params().end());
    flat.insert(flat.end(), log_std.begin(), log_std.end());
    flat.insert(flat.end(), value.params().begin(), value.params().end());
    return flat;
}

void ActorCritic::set_flat_params(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw std::invalid_argument("set_flat_params: size mismatch");
    auto it = flat.begin();
    std::copy_n(it, policy.parameter_count(), policy.params().begin());
    it += static_cast<std::ptrdiff_t>(policy.parameter_count());
    std::copy_n(it, log_std.size(), log_std.begin());
    it += static_cast<std::ptrdiff_t>(log_std.size());
    std::copy_n(it, value.parameter_count(), value.params().begin());
}

void ActorCritic::clamp_log_std() {
    for (double& ls : log_std) ls = std::clamp(ls, distributions::kLogStdMin, distributions::kLogStdMax);
}

}  // namespace sqrt_trust
