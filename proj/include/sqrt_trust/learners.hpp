#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sqrt_trust/actor_critic.hpp"
#include "sqrt_trust/analytics.hpp"
#include "sqrt_trust/geometry.hpp"
#include "sqrt_trust/nets.hpp"
#include "sqrt_trust/rollout.hpp"

namespace sqrt_trust::learners {

enum class Algorithm { bppo, ppo, btrpo, trpo_kl, ppo_reg, bppo_reg };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view name);
std::vector<Algorithm> all_algorithms();

struct UpdateConfig {
    Algorithm algorithm = Algorithm::bppo;
    geometry::SurrogateConfig surrogate;
    std::size_t epochs = 10;
    std::size_t minibatch_size = 64;
    double value_coef = 0.5;
    double max_grad_norm = 0.5;
    /// Center and scale advantages before the update.
    bool normalize_advantages = true;
    /// Normalize per minibatch instead of once per update batch.
    bool per_minibatch_normalization = false;
    /// BTRPO refuses beta == 0 unless this is set.
    bool allow_zero_beta = false;

    void validate() const;
};

struct UpdateReport {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double penalty_value = 0.0;
    analytics::RatioStats ratio_pre;   ///< ratios seen during the first epoch
    analytics::RatioStats ratio_post;  ///< ratios of the final policy on the whole batch
    double q_mean = 1.0;               ///< mean square-root ratio after the update
    double gradient_norm = 0.0;        ///< mean pre-clip global gradient norm
    std::size_t optimizer_steps = 0;
};

/// Raised when a loss or gradient turns non-finite; the model is left as it
/// was before the update.
class UpdateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-sample pieces of the policy objective for one log-ratio.
struct SampleTerms {
    double delta = 0.0;      ///< log-ratio after optional saturation
    double r = 1.0;
    double q = 1.0;
    double surrogate = 0.0;  ///< maximized term
    double d_surrogate = 0.0;
    double penalty_term = 0.0;  ///< per-sample divergence term (penalized algorithms)
    double d_penalty = 0.0;
};

SampleTerms sample_terms(const UpdateConfig& config, double delta_raw, double adv);

struct PolicyLoss {
    double loss = 0.0;            ///< -mean(surrogate) + penalty - entropy_coef * mean(entropy)
    double surrogate_mean = 0.0;
    double penalty = 0.0;
    double entropy_mean = 0.0;
    std::vector<double> dloss_dlogp;  ///< per-sample derivative of `loss` w.r.t. log pi_new
    std::vector<double> r;            ///< likelihood ratios from the raw log-ratios
    std::vector<double> q;            ///< square-root ratios used by the objective
};

/// Policy objective from log-probabilities alone. `entropies` may be empty.
PolicyLoss policy_loss(const UpdateConfig& config, std::span<const double> logp_new,
                       std::span<const double> logp_old, std::span<const double> advantages,
                       std::span<const double> entropies = {});

/// mean((pred - target)^2)
double value_loss(std::span<const double> values_pred, std::span<const double> returns);

struct LossAndGradient {
    PolicyLoss policy;
    double value_loss = 0.0;
    double total = 0.0;         ///< policy.loss + value_coef * value_loss
    std::vector<double> grad;   ///< flat layout of ActorCritic
};

/// Loss and exact gradient over `indices` of `batch`, with `advantages`
/// aligned to `indices`.
LossAndGradient loss_and_gradient(const ActorCritic& model, const rollout::TrajectoryBatch& batch,
                                  std::span<const std::size_t> indices, std::span<const double> advantages,
                                  const UpdateConfig& config, bool with_gradient = true);

/// Runs `epochs` passes of minibatch Adam on the cached batch.
UpdateReport update(ActorCritic& model, nets::AdamState& optimizer, const rollout::TrajectoryBatch& batch,
                    const UpdateConfig& config, Rng& rng);

struct TrainConfig {
    UpdateConfig update;
    std::size_t rollout_len = 2048;
    double gamma = 0.99;
    double lambda_gae = 0.95;
    double learning_rate = 3e-4;
    std::vector<std::size_t> hidden = {64, 64};
    bool scale_observations = true;
    std::size_t eval_every = 10;  ///< updates between evaluations; the last update is always evaluated
    std::size_t eval_episodes = 20;
};

struct EvalResult {
    double mean = 0.0;
    double std = 0.0;
    std::vector<double> returns;
};

/// Greedy evaluation: Gaussian mean action, categorical argmax.
EvalResult evaluate(const ActorCritic& model, std::string_view env_name, std::size_t episodes, std::uint64_t seed);

struct TrainResult {
    std::vector<analytics::MetricsRecord> records;
    ActorCritic model;
    std::size_t updates = 0;
    std::size_t env_steps = 0;
};

/// Alternates collection and update for floor(total_steps / rollout_len)
/// iterations. `on_record` (optional) sees every metrics row as it is produced.
TrainResult train(std::string_view env_name, const TrainConfig& config, std::size_t total_steps, std::uint64_t seed,
                  const std::function<void(const analytics::MetricsRecord&)>& on_record = {});

}  // namespace sqrt_trust::learners
