#pragma once

#include <span>
#include <vector>

#include "sqrt_trust/distributions.hpp"
#include "sqrt_trust/envs.hpp"
#include "sqrt_trust/nets.hpp"
#include "sqrt_trust/rng.hpp"

namespace sqrt_trust {

/// Policy network (Gaussian mean or categorical logits), shared log-std for
/// continuous actions, and a separate value network.
///
/// Flat parameter layout used by the optimizer: [policy | log_std | value].
struct ActorCritic {
    envs::ActionSpace action_space;
    std::vector<double> obs_low, obs_high;  ///< empty => inputs used as-is
    nets::Mlp policy;
    std::vector<double> log_std;  ///< empty for discrete actions
    nets::Mlp value;

    /// Policy final layer scaled by 0.01; log_std starts at 0.
    static ActorCritic create(const envs::EnvSpec& spec, const std::vector<std::size_t>& hidden, Rng& rng,
                              bool scale_observations = true);

    bool continuous() const { return !action_space.discrete; }

    /// Affine map of nominal observation bounds onto [-1, 1].
    std::vector<double> preprocess(std::span<const double> observation) const;

    distributions::ActionDistribution make_distribution(std::span<const double> policy_output) const;
    distributions::ActionDistribution distribution(std::span<const double> observation) const;
    double state_value(std::span<const double> observation) const;

    std::size_t parameter_count() const;
    std::size_t policy_offset() const { return 0; }
    std::size_t log_std_offset() const { return policy.parameter_count(); }
    std::size_t value_offset() const { return policy.parameter_count() + log_std.size(); }

    std::vector<double> flat_params() const;
    void set_flat_params(std::span<const double> flat);
    void clamp_log_std();

    bool operator==(const ActorCritic&) const = default;
};

}  // namespace sqrt_trust
