#include "sqrt_trust/rollout.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace sqrt_trust::rollout {

Transition TrajectoryBatch::transition(std::size_t i) const {
    const auto obs = observation(i);
    const auto act = action(i);
    return {{obs.begin(), obs.end()},
            {act.begin(), act.end()},
            rewards[i],
            values[i],
            logp_old[i],
            terminals[i] != 0,
            truncateds[i] != 0};
}

void TrajectoryBatch::push_back(const Transition& t) {
    if (t.observation.size() != obs_dim || t.action.size() != action_dim)
        throw std::invalid_argument("TrajectoryBatch::push_back: dimension mismatch");
    if (!std::isfinite(t.logp_old) || !std::isfinite(t.value_estimate))
        throw std::invalid_argument("TrajectoryBatch::push_back: non-finite logp_old or value");
    observations.insert(observations.end(), t.observation.begin(), t.observation.end());
    actions.insert(actions.end(), t.action.begin(), t.action.end());
    rewards.push_back(t.reward);
    values.push_back(t.value_estimate);
    logp_old.push_back(t.logp_old);
    terminals.push_back(t.terminal ? 1 : 0);
    truncateds.push_back(t.truncated ? 1 : 0);
    truncation_values.push_back(0.0);
}

TrajectoryBatch collect(const ActorCritic& model, Collector& collector, std::size_t n_steps, double gamma,
                        double lambda_gae) {
    if (n_steps == 0) throw std::invalid_argument("collect: n_steps must be >= 1");
    auto& env = collector.env;
    const auto& spec = env.spec();

    TrajectoryBatch batch;
    batch.obs_dim = spec.observation_dim;
    batch.action_dim = spec.action_space.flat_dim();
    batch.observations.reserve(n_steps * batch.obs_dim);
    batch.actions.reserve(n_steps * batch.action_dim);

    if (!collector.started) {
        env.reset(collector.env_seed);
        collector.started = true;
        collector.episode_return = 0.0;
    }

    nets::Mlp::Workspace policy_ws;
    nets::Mlp::Workspace value_ws;
    for (std::size_t i = 0; i < n_steps; ++i) {
        Transition t;
        t.observation = env.state().observation;
        const auto input = model.preprocess(t.observation);
        const auto dist = model.make_distribution(model.policy.forward(input, policy_ws));
        t.action = distributions::sample(dist, collector.sampling_rng);
        t.logp_old = distributions::log_prob(dist, t.action);
        t.value_estimate = model.value.forward(input, value_ws)[0];

        const auto result = env.step(t.action);
        t.reward = result.reward;
        t.terminal = result.state.terminal;
        t.truncated = result.state.truncated;
        collector.episode_return += t.reward;
        batch.push_back(t);
        if (t.truncated) batch.truncation_values.back() = model.state_value(result.state.observation);

        if (result.state.done()) {
            batch.completed_episode_returns.push_back(collector.episode_return);
            collector.episode_return = 0.0;
            env.reset();
        }
    }
    const bool last_done = batch.terminals.back() || batch.truncateds.back();
    batch.bootstrap_value = last_done ? 0.0 : model.state_value(env.state().observation);
    compute_targets(batch, gamma, lambda_gae);
    return batch;
}

std::vector<double> gae_general(std::span<const double> rewards, std::span<const double> values,
                                std::span<const double> next_values, std::span<const char> episode_ends,
                                double gamma, double lambda_gae) {
    const std::size_t n = rewards.size();
    if (values.size() != n || next_values.size() != n || episode_ends.size() != n)
        throw std::invalid_argument("gae: array length mismatch");
    if (!(gamma >= 0.0 && gamma <= 1.0) || !(lambda_gae >= 0.0 && lambda_gae <= 1.0))
        throw std::invalid_argument("gae: gamma and lambda must lie in [0, 1]");
    std::vector<double> adv(n, 0.0);
    double running = 0.0;
    for (std::size_t t = n; t-- > 0;) {
        const double delta = rewards[t] + gamma * next_values[t] - values[t];
        running = delta + (episode_ends[t] ? 0.0 : gamma * lambda_gae * running);
        adv[t] = running;
    }
    return adv;
}

std::vector<double> gae(std::span<const double> rewards, std::span<const double> values, double value_bootstrap,
                        std::span<const char> terminals, double gamma, double lambda_gae) {
    const std::size_t n = rewards.size();
    if (values.size() != n || terminals.size() != n) throw std::invalid_argument("gae: array length mismatch");
    std::vector<double> next(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double v_next = t + 1 < n ? values[t + 1] : value_bootstrap;
        next[t] = terminals[t] ? 0.0 : v_next;
    }
    return gae_general(rewards, values, next, terminals, gamma, lambda_gae);
}

void compute_targets(TrajectoryBatch& batch, double gamma, double lambda_gae) {
    const std::size_t n = batch.size();
    std::vector<double> next(n);
    std::vector<char> ends(n);
    for (std::size_t t = 0; t < n; ++t) {
        ends[t] = batch.terminals[t] || batch.truncateds[t];
        if (batch.terminals[t])
            next[t] = 0.0;
        else if (batch.truncateds[t])
            next[t] = batch.truncation_values[t];
        else
            next[t] = t + 1 < n ? batch.values[t + 1] : batch.bootstrap_value;
    }
    batch.advantages = gae_general(batch.rewards, batch.values, next, ends, gamma, lambda_gae);
    batch.returns.resize(n);
    for (std::size_t t = 0; t < n; ++t) batch.returns[t] = batch.advantages[t] + batch.values[t];
}

std::vector<double> normalize_advantages(std::span<const double> advantages) {
    if (advantages.empty()) throw std::invalid_argument("normalize_advantages: empty batch");
    const double n = static_cast<double>(advantages.size());
    const double mean = std::accumulate(advantages.begin(), advantages.end(), 0.0) / n;
    double var = 0.0;
    for (double a : advantages) var += (a - mean) * (a - mean);
    const double std = std::sqrt(var / n);
    std::vector<double> out(advantages.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (advantages[i] - mean) / (std + 1e-8);
    return out;
}

TrajectoryBatch normalize_advantages(TrajectoryBatch batch) {
    batch.advantages = normalize_advantages(batch.advantages);
    return batch;
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t batch_size, std::size_t size, Rng& rng) {
    if (size == 0) throw std::invalid_argument("minibatches: size must be >= 1");
    if (size > batch_size) throw std::invalid_argument("minibatches: size exceeds batch length");
    std::vector<std::size_t> perm(batch_size);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<std::vector<std::size_t>> chunks;
    for (std::size_t start = 0; start < batch_size; start += size) {
        const std::size_t end = std::min(start + size, batch_size);
        chunks.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                            perm.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return chunks;
}

void write_batch_csv(std::ostream& out, const TrajectoryBatch& batch) {
    out << "step";
    for (std::size_t k = 0; k < batch.obs_dim; ++k) out << ",obs" << k;
    for (std::size_t k = 0; k < batch.action_dim; ++k) out << ",action" << k;
    out << ",reward,value,logp_old,terminal,truncated\n";
    char buf[32];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    };
    for (std::size_t i = 0; i < batch.size(); ++i) {
        out << i;
        for (double v : batch.observation(i)) out << ',' << num(v);
        for (double v : batch.action(i)) out << ',' << num(v);
        out << ',' << num(batch.rewards[i]);
        out << ',' << num(batch.values[i]);
        out << ',' << num(batch.logp_old[i]);
        out << ',' << int(batch.terminals[i]) << ',' << int(batch.truncateds[i]) << '\n';
    }
}

}  // namespace sqrt_trust::rollout
