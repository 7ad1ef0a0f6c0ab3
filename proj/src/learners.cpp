#include "sqrt_trust/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sqrt_trust/distributions.hpp"

namespace sqrt_trust::learners {

namespace {

using geometry::RegularizerKind;

bool is_penalized(Algorithm a) {
    return a == Algorithm::trpo_kl || a == Algorithm::ppo_reg || a == Algorithm::bppo_reg;
}

RegularizerKind penalty_kind(const UpdateConfig& config) {
    return config.algorithm == Algorithm::trpo_kl ? RegularizerKind::kl_forward
                                                  : config.surrogate.regularizer_kind;
}

double mean_of(std::span<const double> v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::bppo: return "bppo";
        case Algorithm::ppo: return "ppo";
        case Algorithm::btrpo: return "btrpo";
        case Algorithm::trpo_kl: return "trpo_kl";
        case Algorithm::ppo_reg: return "ppo_reg";
        case Algorithm::bppo_reg: return "bppo_reg";
    }
    return "bppo";
}

Algorithm parse_algorithm(std::string_view name) {
    for (auto a : all_algorithms())
        if (to_string(a) == name) return a;
    if (name == "trpo") return Algorithm::trpo_kl;
    throw std::invalid_argument("unknown algorithm: " + std::string(name));
}

std::vector<Algorithm> all_algorithms() {
    return {Algorithm::bppo, Algorithm::ppo, Algorithm::btrpo, Algorithm::trpo_kl, Algorithm::ppo_reg,
            Algorithm::bppo_reg};
}

void UpdateConfig::validate() const {
    surrogate.validate();
    if (epochs == 0) throw std::invalid_argument("epochs must be >= 1");
    if (minibatch_size == 0) throw std::invalid_argument("minibatch_size must be >= 1");
    if (!(value_coef >= 0.0)) throw std::invalid_argument("value_coef must be >= 0");
    if (!(max_grad_norm > 0.0)) throw std::invalid_argument("max_grad_norm must be > 0");
    if (algorithm == Algorithm::ppo_reg || algorithm == Algorithm::bppo_reg) {
        if (surrogate.regularizer_kind == RegularizerKind::none)
            throw std::invalid_argument(std::string(to_string(algorithm)) + " requires a regularizer kind");
        if (!(surrogate.lambda_pen > 0.0))
            throw std::invalid_argument(std::string(to_string(algorithm)) + " requires lambda_pen > 0");
    }
    if (algorithm == Algorithm::btrpo && surrogate.beta == 0.0 && !allow_zero_beta)
        throw std::invalid_argument("btrpo with beta = 0 requires allow_zero_beta");
}

SampleTerms sample_terms(const UpdateConfig& config, double delta_raw, double adv) {
    const auto& s = config.surrogate;
    SampleTerms t;
    double chain = 1.0;
    t.delta = delta_raw;
    if (s.saturation_c) {
        t.delta = geometry::saturate_log_ratio({delta_raw}, *s.saturation_c).delta;
        chain = geometry::dlog::saturate(delta_raw, *s.saturation_c);
    }
    const auto ratio = geometry::sqrt_ratio({t.delta});
    t.r = ratio.r;
    t.q = ratio.q;

    switch (config.algorithm) {
        case Algorithm::bppo:
        case Algorithm::bppo_reg:
            t.surrogate = geometry::bppo_surrogate(t.q, adv, s.epsilon);
            t.d_surrogate = geometry::dlog::bppo_surrogate(t.q, adv, s.epsilon);
            break;
        case Algorithm::ppo:
        case Algorithm::ppo_reg:
            t.surrogate = geometry::ppo_surrogate(t.r, adv, s.epsilon);
            t.d_surrogate = geometry::dlog::ppo_surrogate(t.r, adv, s.epsilon);
            break;
        case Algorithm::btrpo:
            t.surrogate = geometry::btrpo_objective(t.q, adv, s.beta);
            t.d_surrogate = geometry::dlog::btrpo_objective(t.q, adv, s.beta);
            break;
        case Algorithm::trpo_kl:
            t.surrogate = t.r * adv;
            t.d_surrogate = t.r * adv;
            break;
    }
    // Past the exponent guard the ratio is constant in delta.
    if (ratio.overflow) t.d_surrogate = 0.0;

    if (is_penalized(config.algorithm)) {
        const auto kind = penalty_kind(config);
        t.penalty_term = geometry::divergence_term(kind, t.r, t.delta);
        t.d_penalty = geometry::dlog::divergence_term(kind, t.r, t.delta);
    }
    t.d_surrogate *= chain;
    t.d_penalty *= chain;
    return t;
}

PolicyLoss policy_loss(const UpdateConfig& config, std::span<const double> logp_new,
                       std::span<const double> logp_old, std::span<const double> advantages,
                       std::span<const double> entropies) {
    const std::size_t m = logp_new.size();
    if (m == 0) throw std::invalid_argument("policy_loss: empty batch");
    if (logp_old.size() != m || advantages.size() != m || (!entropies.empty() && entropies.size() != m))
        throw std::invalid_argument("policy_loss: misaligned inputs");

    PolicyLoss out;
    out.dloss_dlogp.resize(m);
    out.r.resize(m);
    out.q.resize(m);
    std::vector<double> r_eff(m), delta_eff(m);
    const double inv_m = 1.0 / static_cast<double>(m);
    const double weight = is_penalized(config.algorithm) ? config.surrogate.lambda_pen : 0.0;

    double surrogate_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double delta = logp_new[i] - logp_old[i];
        if (!std::isfinite(delta) || !std::isfinite(advantages[i])) {
            std::ostringstream msg;
            msg << "non-finite log-ratio or advantage at sample " << i << " (logp_new=" << logp_new[i]
                << ", logp_old=" << logp_old[i] << ", adv=" << advantages[i] << ")";
            throw UpdateError(msg.str());
        }
        const auto t = sample_terms(config, delta, advantages[i]);
        surrogate_sum += t.surrogate;
        out.r[i] = geometry::sqrt_ratio({delta}).r;
        out.q[i] = t.q;
        r_eff[i] = t.r;
        delta_eff[i] = t.delta;
        out.dloss_dlogp[i] = (-t.d_surrogate + weight * t.d_penalty) * inv_m;
    }
    out.surrogate_mean = surrogate_sum * inv_m;

    double added_penalty = 0.0;
    if (config.algorithm == Algorithm::btrpo) {
        out.penalty = config.surrogate.beta * geometry::hellinger_penalty(out.q);
    } else if (is_penalized(config.algorithm)) {
        out.penalty = weight * geometry::divergence_penalty(penalty_kind(config), r_eff, delta_eff);
        added_penalty = out.penalty;
    }
    out.entropy_mean = mean_of(entropies);
    out.loss = -out.surrogate_mean + added_penalty - config.surrogate.entropy_coef * out.entropy_mean;
    if (!std::isfinite(out.loss)) throw UpdateError("non-finite policy loss");
    return out;
}

double value_loss(std::span<const double> values_pred, std::span<const double> returns) {
    if (values_pred.size() != returns.size()) throw std::invalid_argument("value_loss: length mismatch");
    if (values_pred.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < returns.size(); ++i) s += (values_pred[i] - returns[i]) * (values_pred[i] - returns[i]);
    return s / static_cast<double>(returns.size());
}

LossAndGradient loss_and_gradient(const ActorCritic& model, const rollout::TrajectoryBatch& batch,
                                  std::span<const std::size_t> indices, std::span<const double> advantages,
                                  const UpdateConfig& config, bool with_gradient) {
    const std::size_t m = indices.size();
    if (m == 0) throw std::invalid_argument("loss_and_gradient: empty index set");
    if (advantages.size() != m) throw std::invalid_argument("loss_and_gradient: advantages misaligned");

    const std::size_t obs_dim = model.policy.input_dim();
    std::vector<double> inputs(m * obs_dim);
    for (std::size_t k = 0; k < m; ++k) {
        const auto x = model.preprocess(batch.observation(indices[k]));
        std::copy(x.begin(), x.end(), inputs.begin() + static_cast<std::ptrdiff_t>(k * obs_dim));
    }

    nets::Mlp::Workspace policy_ws;
    const auto policy_out = model.policy.forward_batch(inputs, m, policy_ws);
    const std::size_t out_dim = model.policy.output_dim();
    std::vector<distributions::ActionDistribution> dists;
    dists.reserve(m);
    std::vector<double> logp_new(m), logp_old(m), entropies(m), returns(m);
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = indices[k];
        dists.push_back(model.make_distribution(policy_out.subspan(k * out_dim, out_dim)));
        logp_new[k] = distributions::log_prob(dists.back(), batch.action(i));
        entropies[k] = distributions::entropy(dists.back());
        logp_old[k] = batch.logp_old[i];
        returns[k] = batch.returns[i];
    }

    LossAndGradient out;
    out.policy = policy_loss(config, logp_new, logp_old, advantages, entropies);

    nets::Mlp::Workspace value_ws;
    const auto value_out = model.value.forward_batch(inputs, m, value_ws);
    const std::vector<double> values(value_out.begin(), value_out.end());
    out.value_loss = value_loss(values, returns);
    out.total = out.policy.loss + config.value_coef * out.value_loss;
    if (!std::isfinite(out.total)) throw UpdateError("non-finite total loss");
    if (!with_gradient) return out;

    out.grad.assign(model.parameter_count(), 0.0);
    auto grad = std::span<double>(out.grad);
    auto policy_grad = grad.subspan(model.policy_offset(), model.policy.parameter_count());
    auto log_std_grad = grad.subspan(model.log_std_offset(), model.log_std.size());
    auto value_grad = grad.subspan(model.value_offset(), model.value.parameter_count());
    const double entropy_coef = config.surrogate.entropy_coef;
    const double inv_m = 1.0 / static_cast<double>(m);

    std::vector<double> dvalue(m);
    for (std::size_t k = 0; k < m; ++k) dvalue[k] = config.value_coef * 2.0 * (values[k] - returns[k]) * inv_m;
    model.value.backward(value_ws, dvalue, value_grad);

    std::vector<double> output_grad(m * out_dim, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        const double g = out.policy.dloss_dlogp[k];
        const auto action = batch.action(indices[k]);
        double* og = output_grad.data() + k * out_dim;
        if (const auto* gauss = std::get_if<distributions::DiagGaussian>(&dists[k])) {
            const auto pg = distributions::log_prob_grad(*gauss, action);
            for (std::size_t j = 0; j < pg.first.size(); ++j) {
                og[j] = g * pg.first[j];
                log_std_grad[j] += g * pg.second[j];
            }
        } else {
            const auto& cat = std::get<distributions::Categorical>(dists[k]);
            const auto pg = distributions::log_prob_grad(cat, static_cast<std::size_t>(action[0]));
            for (std::size_t j = 0; j < pg.first.size(); ++j) og[j] = g * pg.first[j];
            if (entropy_coef > 0.0) {
                const auto hg = distributions::entropy_grad(cat);
                for (std::size_t j = 0; j < hg.size(); ++j) og[j] -= entropy_coef * inv_m * hg[j];
            }
        }
    }
    model.policy.backward(policy_ws, output_grad, policy_grad);
    // Gaussian entropy is sum(log_std) + const, identical for every sample.
    for (double& g : log_std_grad) g -= entropy_coef;

    for (double g : out.grad)
        if (!std::isfinite(g)) throw UpdateError("non-finite gradient");
    return out;
}

UpdateReport update(ActorCritic& model, nets::AdamState& optimizer, const rollout::TrajectoryBatch& batch,
                    const UpdateConfig& config, Rng& rng) {
    config.validate();
    const std::size_t n = batch.size();
    if (n == 0) throw std::invalid_argument("update: empty batch");
    if (batch.advantages.size() != n || batch.returns.size() != n)
        throw std::invalid_argument("update: batch has no advantages/returns");

    const ActorCritic model_before = model;
    const nets::AdamState optimizer_before = optimizer;

    const bool per_minibatch = config.normalize_advantages && config.per_minibatch_normalization;
    const auto batch_adv = config.normalize_advantages && !per_minibatch
                               ? rollout::normalize_advantages(batch.advantages)
                               : batch.advantages;
    const std::size_t mb_size = std::min(config.minibatch_size, n);

    UpdateReport report;
    std::vector<double> first_epoch_r(n, 1.0);
    double norm_sum = 0.0;
    try {
        for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
            for (const auto& mb : rollout::minibatches(n, mb_size, rng)) {
                std::vector<double> adv(mb.size());
                for (std::size_t k = 0; k < mb.size(); ++k) adv[k] = batch_adv[mb[k]];
                if (per_minibatch) adv = rollout::normalize_advantages(adv);

                auto lg = loss_and_gradient(model, batch, mb, adv, config, true);
                if (epoch == 0)
                    for (std::size_t k = 0; k < mb.size(); ++k) first_epoch_r[mb[k]] = lg.policy.r[k];

                norm_sum += nets::clip_grad_norm(lg.grad, config.max_grad_norm);
                ++report.optimizer_steps;
                auto params = model.flat_params();
                nets::adam_step(optimizer, params, lg.grad);
                for (double p : params)
                    if (!std::isfinite(p)) throw UpdateError("non-finite parameter after optimizer step");
                model.set_flat_params(params);
                model.clamp_log_std();
            }
        }
    } catch (const UpdateError& e) {
        model = model_before;
        optimizer = optimizer_before;
        throw UpdateError(std::string("update aborted: ") + e.what());
    }

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<double> full_adv = batch_adv;
    if (per_minibatch) full_adv = rollout::normalize_advantages(full_adv);
    const auto final_eval = loss_and_gradient(model, batch, all, full_adv, config, false);

    report.policy_loss = final_eval.policy.loss;
    report.value_loss = final_eval.value_loss;
    report.entropy = final_eval.policy.entropy_mean;
    report.penalty_value = final_eval.policy.penalty;
    report.ratio_pre = analytics::ratio_stats(first_epoch_r);
    report.ratio_post = analytics::ratio_stats(final_eval.policy.r);
    report.q_mean = mean_of(final_eval.policy.q);
    report.gradient_norm = report.optimizer_steps ? norm_sum / static_cast<double>(report.optimizer_steps) : 0.0;
    return report;
}

EvalResult evaluate(const ActorCritic& model, std::string_view env_name, std::size_t episodes, std::uint64_t seed) {
    auto env = envs::make_env(env_name);
    EvalResult result;
    for (std::size_t e = 0; e < episodes; ++e) {
        auto state = e == 0 ? env->reset(seed) : env->reset();
        double total = 0.0;
        while (!state.done()) {
            const auto action = distributions::mode(model.distribution(state.observation));
            const auto step = env->step(action);
            total += step.reward;
            state = step.state;
        }
        result.returns.push_back(total);
    }
    if (!result.returns.empty()) {
        result.mean = mean_of(result.returns);
        double var = 0.0;
        for (double r : result.returns) var += (r - result.mean) * (r - result.mean);
        result.std = std::sqrt(var / static_cast<double>(result.returns.size()));
    }
    return result;
}

TrainResult train(std::string_view env_name, const TrainConfig& config, std::size_t total_steps, std::uint64_t seed,
                  const std::function<void(const analytics::MetricsRecord&)>& on_record) {
    config.update.validate();
    if (config.rollout_len == 0) throw std::invalid_argument("rollout_len must be >= 1");
    if (total_steps < config.rollout_len) throw std::invalid_argument("total_steps must cover at least one rollout");
    if (config.eval_every == 0) throw std::invalid_argument("eval_every must be >= 1");

    const auto spec = envs::env_spec(env_name);
    Rng init_rng(seed, Stream::policy_init);
    Rng sampling_rng(seed, Stream::sampling);
    Rng minibatch_rng(seed, Stream::minibatch);
    const std::uint64_t env_seed = Rng(seed, Stream::env).next_u64();
    const std::uint64_t eval_seed = Rng(seed, Stream::evaluation).next_u64();

    TrainResult result{{}, ActorCritic::create(spec, config.hidden, init_rng, config.scale_observations), 0, 0};
    auto& model = result.model;
    nets::AdamState optimizer(model.parameter_count(), config.learning_rate);
    auto env = envs::make_env(env_name);
    rollout::Collector collector{*env, sampling_rng, env_seed};

    const std::size_t n_updates = total_steps / config.rollout_len;
    for (std::size_t u = 0; u < n_updates; ++u) {
        const auto batch = rollout::collect(model, collector, config.rollout_len, config.gamma, config.lambda_gae);
        const auto report = update(model, optimizer, batch, config.update, minibatch_rng);
        result.env_steps += batch.size();
        ++result.updates;

        analytics::MetricsRecord rec;
        rec.env_steps = result.env_steps;
        rec.update_idx = u;
        rec.policy_loss = report.policy_loss;
        rec.value_loss = report.value_loss;
        rec.entropy = report.entropy;
        rec.penalty = report.penalty_value;
        rec.ratio_mean = report.ratio_post.mean_r;
        rec.ratio_p99 = report.ratio_post.p99_r;
        rec.ratio_max = report.ratio_post.max_r;
        rec.ratio_min = report.ratio_post.min_r;
        rec.q_mean = report.q_mean;
        rec.grad_norm = report.gradient_norm;
        if ((u + 1) % config.eval_every == 0 || u + 1 == n_updates) {
            const auto eval = evaluate(model, env_name, config.eval_episodes, eval_seed);
            rec.eval_return_mean = eval.mean;
            rec.eval_return_std = eval.std;
        }
        if (on_record) on_record(rec);
        result.records.push_back(rec);
    }
    return result;
}

}  // namespace sqrt_trust::learners
