#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "sqrt_trust/actor_critic.hpp"
#include "sqrt_trust/envs.hpp"
#include "sqrt_trust/rng.hpp"

namespace sqrt_trust::rollout {

struct Transition {
    std::vector<double> observation;
    std::vector<double> action;
    double reward = 0.0;
    double value_estimate = 0.0;
    double logp_old = 0.0;
    bool terminal = false;
    bool truncated = false;
};

/// Experience from one behavior policy, stored column-wise.
struct TrajectoryBatch {
    std::size_t obs_dim = 0;
    std::size_t action_dim = 0;

    std::vector<double> observations;  ///< size() x obs_dim, row-major
    std::vector<double> actions;       ///< size() x action_dim, pre-clip
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<double> logp_old;
    std::vector<char> terminals;
    std::vector<char> truncateds;
    /// V(final observation) for truncated steps, 0 elsewhere.
    std::vector<double> truncation_values;
    /// V of the observation following the last stored step (0 if it ended an episode).
    double bootstrap_value = 0.0;

    std::vector<double> advantages;
    std::vector<double> returns;

    /// Undiscounted returns of episodes that finished during collection.
    std::vector<double> completed_episode_returns;

    std::size_t size() const { return rewards.size(); }
    std::span<const double> observation(std::size_t i) const {
        return std::span<const double>(observations).subspan(i * obs_dim, obs_dim);
    }
    std::span<const double> action(std::size_t i) const {
        return std::span<const double>(actions).subspan(i * action_dim, action_dim);
    }
    Transition transition(std::size_t i) const;
    void push_back(const Transition& t);
};

/// Carries the environment's running episode between successive collect() calls.
struct Collector {
    envs::Env& env;
    Rng& sampling_rng;
    std::uint64_t env_seed;
    bool started = false;
    double episode_return = 0.0;
};

/// Steps `n_steps` times with the current policy, resetting finished
/// episodes, then fills advantages/returns with GAE.
TrajectoryBatch collect(const ActorCritic& model, Collector& collector, std::size_t n_steps, double gamma,
                        double lambda_gae);

/// GAE over a single stream with terminal flags only:
/// delta_t = r_t + gamma V_{t+1} (1 - terminal_t) - V_t, V_n = value_bootstrap.
std::vector<double> gae(std::span<const double> rewards, std::span<const double> values, double value_bootstrap,
                        std::span<const char> terminals, double gamma, double lambda_gae);

/// General form: next_values[t] is the bootstrap target of step t and
/// episode_ends[t] cuts the recursion after step t.
std::vector<double> gae_general(std::span<const double> rewards, std::span<const double> values,
                                std::span<const double> next_values, std::span<const char> episode_ends,
                                double gamma, double lambda_gae);

/// Computes advantages and returns for a batch, bootstrapping truncated
/// episodes with V(s_T) and terminal ones with 0.
void compute_targets(TrajectoryBatch& batch, double gamma, double lambda_gae);

/// (A - mean) / (population std + 1e-8).
std::vector<double> normalize_advantages(std::span<const double> advantages);
TrajectoryBatch normalize_advantages(TrajectoryBatch batch);

/// Random permutation of [0, batch_size) cut into consecutive chunks of
/// `size`; the last chunk may be shorter.
std::vector<std::vector<std::size_t>> minibatches(std::size_t batch_size, std::size_t size, Rng& rng);

/// Debug dump: step, obs..., action..., reward, value, logp_old, terminal, truncated.
void write_batch_csv(std::ostream& out, const TrajectoryBatch& batch);

}  // namespace sqrt_trust::rollout
