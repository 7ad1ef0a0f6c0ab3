// Command-line front end: train, sweep, verify, aggregate.
#include <cstdlib>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "sqrt_trust/config.hpp"
#include "sqrt_trust/runner.hpp"
#include "sqrt_trust/verify.hpp"

using namespace sqrt_trust;

namespace {

// Hyper-parameter flags shared by train and sweep, stored as text so that
// only flags actually given override the config file.
struct HyperFlags {
    std::vector<std::pair<std::string, std::string>> given;  // (config key, text) in command-line order
    std::vector<std::string> sets;
    std::string config_file;
    std::size_t jobs = 1;
    bool allow_zero_beta = false;

    void add(CLI::App* app, const std::string& flag, std::string key, const std::string& help) {
        app->add_option_function<std::string>(
            flag, [this, key](const std::string& v) { given.emplace_back(key, v); }, help);
    }
};

void add_common(CLI::App* app, HyperFlags& f, bool single_algo) {
    f.add(app, "--env", "env", "cartpole | mountaincar_continuous | frozenlake");
    if (single_algo) f.add(app, "--algo", "algorithm", "bppo | ppo | btrpo | trpo_kl | ppo_reg | bppo_reg");
    f.add(app, "--seeds", "seeds", "seed list, e.g. 0..3 or 0,4,7");
    f.add(app, "--steps", "total_steps", "environment steps per run");
    f.add(app, "--epsilon", "epsilon", "clip width");
    f.add(app, "--beta", "beta", "square-root trust-region weight");
    f.add(app, "--lambda-pen", "lambda_pen", "divergence penalty weight");
    f.add(app, "--regularizer", "regularizer", "kl_forward | kl_reverse | chi2 | js | jeffreys | bc");
    f.add(app, "--entropy-coef", "entropy_coef", "entropy bonus coefficient");
    f.add(app, "--lr", "lr", "Adam learning rate");
    f.add(app, "--batch-size", "minibatch_size", "minibatch size");
    f.add(app, "--rollout-len", "rollout_len", "environment steps per update");
    f.add(app, "--epochs", "epochs", "passes over each rollout");
    f.add(app, "--gamma", "gamma", "discount");
    f.add(app, "--gae-lambda", "lambda_gae", "GAE lambda");
    f.add(app, "--saturation-c", "saturation_c", "log-ratio saturation scale (off unless given)");
    f.add(app, "--eval-every", "eval_every", "updates between evaluations");
    f.add(app, "--eval-episodes", "eval_episodes", "episodes per evaluation");
    f.add(app, "--out", "output_root", "output root (default: $SQRT_TRUST_OUT or ./runs)");
    app->add_flag("--allow-zero-beta", f.allow_zero_beta, "permit btrpo with beta = 0");
    app->add_option("--set", f.sets, "extra key=value config overrides");
    app->add_option("--config", f.config_file, "flat key = value config file");
    app->add_option("--jobs", f.jobs, "runs executed concurrently")->check(CLI::PositiveNumber);
}

config::ExperimentConfig build_config(const HyperFlags& f) {
    config::ExperimentConfig cfg;
    if (const char* env_root = std::getenv("SQRT_TRUST_OUT"); env_root && *env_root) cfg.output_root = env_root;
    if (!f.config_file.empty()) config::apply_file(cfg, f.config_file);
    for (const auto& [key, value] : f.given) config::set_value(cfg, key, value);
    for (const auto& s : f.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
        config::set_value(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (f.allow_zero_beta) cfg.train.update.allow_zero_beta = true;
    return cfg;
}

int usage_error(const CLI::App& app, const std::string& message) {
    std::cerr << "error: " << message << "\n\n" << app.help();
    return 2;
}

std::vector<std::string> split_list(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    for (const auto& item : items) {
        std::size_t start = 0;
        for (;;) {
            const auto comma = item.find(',', start);
            out.push_back(item.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Square-root trust-region policy optimization experiments", "sqrt-trust"};
    app.require_subcommand(1);

    HyperFlags train_flags;
    auto* train = app.add_subcommand("train", "train every seed of one configuration");
    add_common(train, train_flags, true);

    HyperFlags sweep_flags;
    std::vector<std::string> sweep_algos, grid_specs;
    auto* sweep = app.add_subcommand("sweep", "Cartesian grid of configurations");
    add_common(sweep, sweep_flags, false);
    sweep->add_option("--algo", sweep_algos, "one or more algorithms (repeat or comma-separate)");
    sweep->add_option("--grid", grid_specs, "axis as key=v1,v2,... (epsilon, beta, lr, batch_size, entropy_coef)");

    bool list_only = false;
    verify::Options verify_options;
    std::vector<std::string> verify_only;
    auto* verify_cmd = app.add_subcommand("verify", "theory and gradient checks");
    verify_cmd->add_flag("--list", list_only, "print check names without running them");
    verify_cmd->add_option("--only", verify_only, "run only the named checks");
    verify_cmd->add_option("--perturb-bc", verify_options.perturb_bc, "relative fault injected into the BC formula");
    verify_cmd->add_option("--mc-samples", verify_options.mc_samples, "Monte-Carlo samples per distribution pair");
    verify_cmd->add_option("--seed", verify_options.seed, "seed for the randomized checks");

    std::string aggregate_root, aggregate_report;
    auto* aggregate = app.add_subcommand("aggregate", "IQM report and learning curves over completed runs");
    aggregate->add_option("--out", aggregate_root, "root holding run directories (default: $SQRT_TRUST_OUT or ./runs)");
    aggregate->add_option("--report-dir", aggregate_report, "where to write the reports (default: the root)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (*train) {
        config::ExperimentConfig cfg;
        try {
            cfg = build_config(train_flags);
            cfg.validate();
        } catch (const std::exception& e) {
            return usage_error(*train, e.what());
        }
        const auto outcomes = runner::run_experiment(cfg, train_flags.jobs, &std::cout);
        int failed = 0;
        for (const auto& o : outcomes) failed += !o.completed;
        if (failed) std::cerr << failed << " of " << outcomes.size() << " runs failed\n";
        return failed ? 1 : 0;
    }

    if (*sweep) {
        config::ExperimentConfig cfg;
        std::vector<learners::Algorithm> algorithms;
        std::vector<runner::GridAxis> grid;
        try {
            cfg = build_config(sweep_flags);
            for (const auto& name : split_list(sweep_algos)) algorithms.push_back(learners::parse_algorithm(name));
            if (algorithms.empty()) algorithms.push_back(cfg.algorithm);
            for (const auto& g : grid_specs) grid.push_back(runner::parse_grid_axis(g));
            runner::expand_grid(grid);
        } catch (const std::exception& e) {
            return usage_error(*sweep, e.what());
        }
        try {
            const auto cells = runner::run_sweep(cfg, algorithms, grid, sweep_flags.jobs, &std::cout);
            std::cout << cells.size() << " cells; summary in " << (cfg.output_root / "sweep_summary.csv").string()
                      << '\n';
            for (const auto& c : cells)
                for (const auto& [algo, final] : c.finals)
                    if (!final) return 1;
        } catch (const std::invalid_argument& e) {
            return usage_error(*sweep, e.what());
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
        return 0;
    }

    if (*verify_cmd) {
        if (list_only) {
            for (const auto& c : verify::checks()) std::cout << c.name << "  " << c.description << '\n';
            return 0;
        }
        for (const auto& name : verify_only) {
            bool known = false;
            for (const auto& c : verify::checks()) known |= c.name == name;
            if (!known) return usage_error(*verify_cmd, "unknown check '" + name + "'");
        }
        const auto results = verify::run(verify_options, verify_only);
        verify::print_table(std::cout, results);
        for (const auto& r : results)
            if (!r.passed) return 1;
        return 0;
    }

    if (*aggregate) {
        if (aggregate_root.empty()) {
            const char* env_root = std::getenv("SQRT_TRUST_OUT");
            aggregate_root = env_root && *env_root ? env_root : "runs";
        }
        if (aggregate_report.empty()) aggregate_report = aggregate_root;
        try {
            const auto result = runner::aggregate_directory(aggregate_root, aggregate_report, &std::cerr);
            std::cout << result.rows.size() << " report rows written to " << aggregate_report << '\n';
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
        return 0;
    }
    return 2;
}
