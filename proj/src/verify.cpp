#include "sqrt_trust/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sqrt_trust/actor_critic.hpp"
#include "sqrt_trust/analytics.hpp"
#include "sqrt_trust/distributions.hpp"
#include "sqrt_trust/envs.hpp"
#include "sqrt_trust/geometry.hpp"
#include "sqrt_trust/learners.hpp"
#include "sqrt_trust/nets.hpp"
#include "sqrt_trust/rng.hpp"
#include "sqrt_trust/rollout.hpp"

namespace sqrt_trust::verify {

namespace g = geometry;

double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double h) {
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double up = f(x);
        x[i] = saved - h;
        const double down = f(x);
        x[i] = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

namespace {

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, format, a, b, c);
    return buf;
}

double max_rel_error(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, relative_error(a[i], b[i]));
    return worst;
}

g::GaussianSpec unit(double mean, double std = 1.0) { return {{mean}, {std}}; }

double perturbed_bc(const g::GaussianSpec& p, const g::GaussianSpec& q, const Options& o) {
    return g::gaussian_bc(p, q) * (1.0 - o.perturb_bc);
}

CheckResult bc_kl_equivalence(const Options& o) {
    CheckResult res{"bc_kl_equivalence", true, {}, 0.0};
    const double gaps[] = {0.2, 0.1, 0.05, 0.02, 0.01};
    double prev_ratio = INFINITY;
    double worst = 0.0;
    for (double d : gaps) {
        const auto p = unit(0.0), q = unit(d);
        const double kl = g::gaussian_kl(p, q);
        const double err = std::abs((1.0 - perturbed_bc(p, q, o)) - kl / 4.0);
        const double ratio = err / kl;
        worst = std::max(worst, err / std::pow(kl, 1.5));
        if (err > std::pow(kl, 1.5) || !(ratio < prev_ratio)) res.passed = false;
        prev_ratio = ratio;
    }
    res.detail = fmt("max |1-BC-KL/4| / KL^1.5 = %.3g", worst);
    return res;
}

CheckResult bc_closed_form(const Options& o) {
    CheckResult res{"bc_closed_form", true, {}, 0.0};
    Rng rng(o.seed, 11);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double mp = rng.uniform(-2, 2), mg = rng.uniform(-2, 2);
        const double sp = rng.uniform(0.3, 2.0), sg = rng.uniform(0.3, 2.0);
        const double closed = perturbed_bc(unit(mp, sp), unit(mg, sg), o);
        worst = std::max(worst, std::abs(closed - g::gaussian_bc_quadrature(mp, sp, mg, sg)));
    }
    res.passed = worst <= 1e-8;
    res.detail = fmt("max |closed - quadrature| = %.3g over 50 pairs", worst);
    return res;
}

CheckResult tail_bound(const Options& o) {
    CheckResult res{"tail_bound", true, {}, 0.0};
    const double ts[] = {1.5, 2.0, 4.0};
    double worst_margin = INFINITY;
    for (double mu : {0.5, 1.0}) {
        Rng rng(o.seed, 12);
        std::size_t counts[3] = {0, 0, 0};
        for (std::size_t i = 0; i < o.mc_samples; ++i) {
            const double x = rng.normal();  // behavior N(0, 1), target N(mu, 1)
            const double r = std::exp(mu * x - 0.5 * mu * mu);
            for (int k = 0; k < 3; ++k) counts[k] += r >= ts[k];
        }
        const double bc = perturbed_bc(unit(0.0), unit(mu), o);
        for (int k = 0; k < 3; ++k) {
            const double n = static_cast<double>(o.mc_samples);
            const double p = static_cast<double>(counts[k]) / n;
            const double se = std::sqrt(p * (1.0 - p) / n);
            const double margin = g::tail_bound(ts[k], bc) + 3.0 * se - p;
            worst_margin = std::min(worst_margin, margin);
            if (margin < 0.0) res.passed = false;
        }
    }
    res.detail = fmt("min slack of bound over empirical tail = %.4g", worst_margin);
    return res;
}

CheckResult second_moment(const Options& o) {
    CheckResult res{"second_moment", true, {}, 0.0};
    struct Pair { double mu, sigma; };
    double worst = 0.0;
    for (const Pair pr : {Pair{0.5, 1.0}, Pair{1.0, 1.0}, Pair{0.3, 1.2}}) {
        Rng rng(o.seed, 13);
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t i = 0; i < o.mc_samples; ++i) {
            const double x = rng.normal();
            const double z = (x - pr.mu) / pr.sigma;
            const double log_r = -0.5 * z * z - std::log(pr.sigma) + 0.5 * x * x;
            const double v = (std::exp(0.5 * log_r) - 1.0) * (std::exp(0.5 * log_r) - 1.0);
            sum += v;
            sum_sq += v * v;
        }
        const double n = static_cast<double>(o.mc_samples);
        const double mean = sum / n;
        const double se = std::sqrt(std::max(0.0, sum_sq / n - mean * mean) / n);
        const double target = 2.0 * (1.0 - perturbed_bc(unit(0.0), unit(pr.mu, pr.sigma), o));
        const double z_score = std::abs(mean - target) / se;
        worst = std::max(worst, z_score);
        if (z_score > 3.0) res.passed = false;
    }
    res.detail = fmt("max |mean((sqrt r - 1)^2) - 2(1 - BC)| = %.3g SE", worst);
    return res;
}

CheckResult taylor_residual(const Options& o) {
    CheckResult res{"taylor_residual", true, {}, 0.0};
    Rng rng(o.seed, 14);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double q = rng.uniform(0.0, 10.0);
        worst = std::max(worst, std::abs(g::taylor_residual(q) - (q - 1.0) * (q - 1.0)));
    }
    res.passed = worst <= 1e-12;
    res.detail = fmt("max |q^2 - 1 - 2(q-1) - (q-1)^2| = %.3g", worst);
    return res;
}

CheckResult clip_correspondence(const Options& o) {
    CheckResult res{"clip_correspondence", true, {}, 0.0};
    Rng rng(o.seed, 15);
    for (double eps : {0.1, 0.2, 0.5}) {
        const double lo = (1.0 - eps) * (1.0 - eps), hi = (1.0 + eps) * (1.0 + eps);
        for (int i = 0; i < 10000; ++i) {
            const double c = g::clip(rng.uniform(0.0, 5.0), 1.0 - eps, 1.0 + eps);
            if (c * c < lo || c * c > hi) res.passed = false;
        }
    }
    const double lo = g::clip(0.0, 0.8, 1.2), hi = g::clip(9.0, 0.8, 1.2);
    if (std::abs(lo * lo - 0.64) > 1e-15 || std::abs(hi * hi - 1.44) > 1e-15) res.passed = false;
    res.detail = "clip(q)^2 stays in [(1-eps)^2, (1+eps)^2]; eps=0.2 gives [0.64, 1.44]";
    return res;
}

CheckResult boundedness(const Options& o) {
    CheckResult res{"boundedness", true, {}, 0.0};
    Rng rng(o.seed, 16);
    for (double c : {1.0, 2.0, 10.0}) {
        for (int i = 0; i < 10002; ++i) {
            const double d = i == 0 ? 1e6 : i == 1 ? -1e6 : rng.uniform(-1e6, 1e6);
            const auto sat = g::saturate_log_ratio({d}, c);
            const auto rq = g::sqrt_ratio(sat);
            if (std::exp(sat.delta) > std::exp(c) || std::exp(sat.delta / 2) > std::exp(c / 2) ||
                rq.r > std::exp(c) * (1 + 1e-15) || rq.q > std::exp(c / 2))
                res.passed = false;
        }
    }
    res.detail = "saturated multipliers within e^c and e^(c/2) for c in {1, 2, 10}; r = q^2 up to rounding";
    return res;
}

CheckResult grad_distributions(const Options& o) {
    CheckResult res{"grad_distributions", true, {}, 0.0};
    Rng rng(o.seed, 17);
    namespace dist = distributions;
    double worst = 0.0;
    int cases = 0;
    for (int i = 0; i < 120; ++i, ++cases) {
        const std::size_t dim = 1 + rng.uniform_index(3);
        std::vector<double> mean(dim), log_std(dim), action(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            mean[j] = rng.uniform(-2, 2);
            log_std[j] = rng.uniform(-1.5, 1);
            action[j] = mean[j] + std::exp(log_std[j]) * rng.normal();
        }
        const auto analytic = dist::log_prob_grad(dist::DiagGaussian{mean, log_std}, action);
        std::vector<double> x = mean;
        x.insert(x.end(), log_std.begin(), log_std.end());
        const auto numeric = numeric_gradient(
            [&](const std::vector<double>& p) {
                return dist::log_prob(dist::DiagGaussian{{p.begin(), p.begin() + dim}, {p.begin() + dim, p.end()}},
                                      action);
            },
            x);
        worst = std::max({worst, max_rel_error(analytic.first, std::span(numeric).first(dim)),
                          max_rel_error(analytic.second, std::span(numeric).subspan(dim))});
    }
    for (int i = 0; i < 120; ++i, ++cases) {
        const std::size_t n = 2 + rng.uniform_index(5);
        std::vector<double> logits(n);
        for (double& l : logits) l = rng.uniform(-3, 3);
        const std::size_t a = rng.uniform_index(n);
        const auto lp = dist::log_prob_grad(dist::Categorical{logits}, a);
        const auto numeric_lp = numeric_gradient(
            [&](const std::vector<double>& p) { return dist::log_prob(dist::Categorical{p}, a); }, logits);
        const auto he = dist::entropy_grad(dist::Categorical{logits});
        const auto numeric_he = numeric_gradient(
            [&](const std::vector<double>& p) { return dist::entropy(dist::Categorical{p}); }, logits);
        worst = std::max({worst, max_rel_error(lp.first, numeric_lp), max_rel_error(he, numeric_he)});
    }
    res.passed = worst <= 1e-4;
    res.detail = fmt("max rel err %.3g over %g cases", worst, cases);
    return res;
}

CheckResult grad_nets(const Options& o) {
    CheckResult res{"grad_nets", true, {}, 0.0};
    Rng rng(o.seed, 18);
    double worst = 0.0;
    const int cases = 120;
    for (int i = 0; i < cases; ++i) {
        std::vector<std::size_t> dims{1 + rng.uniform_index(4)};
        const std::size_t hidden_layers = 1 + rng.uniform_index(2);
        for (std::size_t l = 0; l < hidden_layers; ++l) dims.push_back(2 + rng.uniform_index(6));
        dims.push_back(1 + rng.uniform_index(3));
        auto net = nets::Mlp::glorot(dims, rng, 1.0);
        for (double& b : net.params()) b += 0.1 * rng.normal();
        std::vector<double> input(dims.front()), out_grad(dims.back());
        for (double& v : input) v = rng.uniform(-1.5, 1.5);
        for (double& v : out_grad) v = rng.normal();
        const auto analytic = net.backward(input, out_grad);
        const auto numeric = numeric_gradient(
            [&](const std::vector<double>& p) {
                nets::Mlp probe = net;
                std::copy(p.begin(), p.end(), probe.params().begin());
                const auto y = probe.forward(input);
                return std::inner_product(y.begin(), y.end(), out_grad.begin(), 0.0);
            },
            {net.params().begin(), net.params().end()});
        worst = std::max(worst, max_rel_error(analytic, numeric));
    }
    res.passed = worst <= 1e-4;
    res.detail = fmt("max rel err %.3g over %g random networks", worst, cases);
    return res;
}

// One-state bandit: constant observation, actions from the current policy,
// behavior log-probabilities offset at random but kept away from the clip
// boundaries at epsilon = 0.2 so central differences never straddle a kink.
struct Bandit {
    ActorCritic model;
    rollout::TrajectoryBatch batch;
    std::vector<std::size_t> indices;
    std::vector<double> advantages;
};

bool near_clip_boundary(double delta) {
    for (double ratio : {std::exp(0.5 * delta), std::exp(delta)})
        for (double edge : {0.8, 1.2})
            if (std::abs(ratio - edge) < 1e-3) return true;
    return false;
}

Bandit make_bandit(bool discrete, Rng& rng, std::size_t n = 16) {
    envs::EnvSpec spec;
    spec.name = "bandit";
    spec.observation_dim = 1;
    spec.action_space.discrete = discrete;
    if (discrete) {
        spec.action_space.n = 3;
    } else {
        spec.action_space.dim = 1;
        spec.action_space.low = {-10.0};
        spec.action_space.high = {10.0};
    }
    Bandit b{ActorCritic::create(spec, {4}, rng, false), {}, {}, {}};
    auto flat = b.model.flat_params();
    for (double& p : flat) p += 0.3 * rng.normal();
    b.model.set_flat_params(flat);
    b.batch.obs_dim = 1;
    b.batch.action_dim = 1;
    const std::vector<double> observation{0.5};
    const auto dist = b.model.distribution(observation);
    for (std::size_t i = 0; i < n; ++i) {
        rollout::Transition t;
        t.observation = observation;
        t.action = distributions::sample(dist, rng);
        double offset;
        do offset = rng.uniform(-1.0, 1.0);
        while (near_clip_boundary(-offset));
        t.logp_old = distributions::log_prob(dist, t.action) + offset;
        b.batch.push_back(t);
        b.batch.returns.push_back(rng.normal());
        b.indices.push_back(i);
        b.advantages.push_back(rng.normal());
    }
    return b;
}

std::vector<learners::UpdateConfig> gradient_configs() {
    using learners::Algorithm;
    std::vector<learners::UpdateConfig> out;
    for (auto a : learners::all_algorithms()) {
        learners::UpdateConfig cfg;
        cfg.algorithm = a;
        cfg.surrogate.entropy_coef = 0.01;
        if (a == Algorithm::ppo_reg || a == Algorithm::bppo_reg) {
            for (auto kind : {g::RegularizerKind::kl_forward, g::RegularizerKind::kl_reverse, g::RegularizerKind::chi2,
                              g::RegularizerKind::js, g::RegularizerKind::jeffreys, g::RegularizerKind::bc}) {
                cfg.surrogate.regularizer_kind = kind;
                out.push_back(cfg);
            }
        } else {
            out.push_back(cfg);
            cfg.surrogate.saturation_c = 2.0;
            out.push_back(cfg);
        }
    }
    return out;
}

CheckResult grad_learners(const Options& o) {
    CheckResult res{"grad_learners", true, {}, 0.0};
    Rng rng(o.seed, 19);
    double worst = 0.0;
    int cases = 0;
    for (const auto& cfg : gradient_configs()) {
        for (bool discrete : {false, true}) {
            auto b = make_bandit(discrete, rng);
            const auto analytic = learners::loss_and_gradient(b.model, b.batch, b.indices, b.advantages, cfg).grad;
            const auto numeric = numeric_gradient(
                [&](const std::vector<double>& p) {
                    auto probe = b.model;
                    probe.set_flat_params(p);
                    return learners::loss_and_gradient(probe, b.batch, b.indices, b.advantages, cfg, false).total;
                },
                b.model.flat_params());
            const double err = max_rel_error(analytic, numeric);
            worst = std::max(worst, err);
            if (err > 1e-4 && res.detail.empty())
                res.detail = std::string(learners::to_string(cfg.algorithm)) + " failed; ";
            ++cases;
        }
    }
    res.passed = worst <= 1e-4;
    res.detail += fmt("max rel err %.3g over %g bandit objectives", worst, cases);
    return res;
}

CheckResult gae_oracle(const Options& o) {
    CheckResult res{"gae_oracle", true, {}, 0.0};
    Rng rng(o.seed, 20);
    double worst = 0.0;
    for (int e = 0; e < 1000; ++e) {
        const std::size_t len = 1 + rng.uniform_index(10);
        const double gamma = rng.uniform(0.9, 1.0), lambda = rng.uniform(0.0, 1.0);
        const bool terminal = rng.uniform() < 0.5;
        std::vector<double> rewards(len), values(len);
        std::vector<char> terminals(len, 0);
        for (auto& r : rewards) r = rng.normal();
        for (auto& v : values) v = rng.normal();
        const double bootstrap = rng.normal();
        terminals.back() = terminal;
        const auto adv = rollout::gae(rewards, values, bootstrap, terminals, gamma, lambda);
        for (std::size_t t = 0; t < len; ++t) {
            double sum = 0.0;
            for (std::size_t l = t; l < len; ++l) {
                const double next = l + 1 < len ? values[l + 1] : (terminal ? 0.0 : bootstrap);
                sum += std::pow(gamma * lambda, static_cast<double>(l - t)) * (rewards[l] + gamma * next - values[l]);
            }
            worst = std::max(worst, std::abs(sum - adv[t]));
        }
    }
    res.passed = worst <= 1e-10;
    res.detail = fmt("max |GAE - discounted delta sum| = %.3g over 1000 episodes", worst);
    return res;
}

CheckResult null_update(const Options& o) {
    CheckResult res{"null_update", true, {}, 0.0};
    for (const char* name : {"cartpole", "mountaincar_continuous"}) {
        Rng init(o.seed, Stream::policy_init), sampling(o.seed, Stream::sampling), minibatch(o.seed, Stream::minibatch);
        auto env = envs::make_env(name);
        auto model = ActorCritic::create(env->spec(), {64, 64}, init);
        const auto before = model;
        nets::AdamState adam(model.parameter_count(), 0.0);
        rollout::Collector collector{*env, sampling, o.seed};
        learners::UpdateConfig cfg;
        cfg.epochs = 2;
        for (int u = 0; u < 5; ++u) {
            const auto batch = rollout::collect(model, collector, 256, 0.99, 0.95);
            const auto report = learners::update(model, adam, batch, cfg, minibatch);
            for (const auto& s : {report.ratio_pre, report.ratio_post})
                if (s.mean_r != 1.0 || s.p99_r != 1.0 || s.max_r != 1.0 || s.min_r != 1.0) res.passed = false;
        }
        if (!(model == before)) res.passed = false;
    }
    res.detail = "lr = 0: every ratio statistic exactly 1, parameters unchanged";
    return res;
}

CheckResult iqm_properties(const Options& o) {
    CheckResult res{"iqm_properties", true, {}, 0.0};
    using analytics::iqm;
    const std::vector<double> a{1, 2, 3, 100}, b{1, 2, 3, 4, 5, 6, 7, 8};
    if (iqm(a) != 2.5 || iqm(b) != 4.5) res.passed = false;
    Rng rng(o.seed, 21);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 1 + rng.uniform_index(20);
        std::vector<double> v(n), w(n);
        const double c = rng.uniform(-100, 100);
        for (std::size_t j = 0; j < n; ++j) {
            v[j] = rng.uniform(-100, 100);
            w[j] = v[j] + rng.uniform(0, 10);
        }
        if (std::abs(iqm(std::vector<double>(n, c)) - c) > 1e-9 * std::max(1.0, std::abs(c))) res.passed = false;
        if (iqm(w) < iqm(v) - 1e-9) res.passed = false;
    }
    res.detail = "examples, constancy and monotonicity on 1000 random vectors";
    return res;
}

}  // namespace

const std::vector<Check>& checks() {
    static const std::vector<Check> all = {
        {"bc_kl_equivalence", "1 - BC matches KL/4 to second order for close Gaussians", bc_kl_equivalence},
        {"bc_closed_form", "closed-form Gaussian BC agrees with quadrature", bc_closed_form},
        {"tail_bound", "Monte-Carlo ratio tails respect 2(1-BC)/(sqrt t - 1)^2", tail_bound},
        {"second_moment", "mean((sqrt r - 1)^2) equals 2(1 - BC)", second_moment},
        {"taylor_residual", "q^2 = 1 + 2(q - 1) + (q - 1)^2", taylor_residual},
        {"clip_correspondence", "clipping q clips r to the squared interval", clip_correspondence},
        {"boundedness", "saturated multipliers are uniformly bounded", boundedness},
        {"grad_distributions", "finite-difference check of distribution gradients", grad_distributions},
        {"grad_nets", "finite-difference check of MLP backprop", grad_nets},
        {"grad_learners", "finite-difference check of every objective on a bandit", grad_learners},
        {"gae_oracle", "GAE equals the brute-force discounted delta sum", gae_oracle},
        {"null_update", "zero learning rate leaves the policy untouched", null_update},
        {"iqm_properties", "interquartile mean examples and properties", iqm_properties},
    };
    return all;
}

std::vector<CheckResult> run(const Options& options, const std::vector<std::string>& only) {
    std::vector<CheckResult> results;
    for (const auto& check : checks()) {
        if (!only.empty() && std::find(only.begin(), only.end(), check.name) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        CheckResult r;
        try {
            r = check.run(options);
        } catch (const std::exception& e) {
            r = {check.name, false, std::string("exception: ") + e.what(), 0.0};
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        results.push_back(std::move(r));
    }
    return results;
}

void print_table(std::ostream& out, const std::vector<CheckResult>& results) {
    std::size_t width = 5;
    for (const auto& r : results) width = std::max(width, r.name.size());
    std::size_t failed = 0;
    for (const auto& r : results) {
        char secs[32];
        std::snprintf(secs, sizeof secs, "%7.2fs", r.seconds);
        out << r.name << std::string(width + 2 - r.name.size(), ' ') << (r.passed ? "PASS" : "FAIL") << "  " << secs
            << "  " << r.detail << '\n';
        failed += !r.passed;
    }
    out << results.size() - failed << '/' << results.size() << " checks passed\n";
}

}  // namespace sqrt_trust::verify
