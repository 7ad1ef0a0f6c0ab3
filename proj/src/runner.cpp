#include "sqrt_trust/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "sqrt_trust/analytics.hpp"
#include "sqrt_trust/nets.hpp"

namespace sqrt_trust::runner {

namespace fs = std::filesystem;
using learners::Algorithm;

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

double beta_or_eps(const learners::UpdateConfig& update) {
    switch (update.algorithm) {
        case Algorithm::btrpo: return update.surrogate.beta;
        case Algorithm::trpo_kl:
        case Algorithm::ppo_reg:
        case Algorithm::bppo_reg: return update.surrogate.lambda_pen;
        default: return update.surrogate.epsilon;
    }
}

std::string cell_id(const config::ExperimentConfig& cfg) {
    auto copy = cfg;
    copy.seeds = {0};
    copy.output_root = ".";
    return fnv1a_hex(config::serialize(copy)).substr(0, 12);
}

fs::path run_dir(const fs::path& root, std::string_view env, Algorithm algorithm, std::uint64_t seed) {
    return root / std::string(env) / std::string(learners::to_string(algorithm)) / ("seed" + std::to_string(seed));
}

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

RunOutcome run_single(const config::ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir) {
    RunOutcome outcome{seed, dir, false, {}, std::nullopt};
    auto snapshot = cfg;
    snapshot.seeds = {seed};

    nlohmann::json manifest;
    manifest["config"] = nlohmann::json::object();
    {
        std::istringstream lines(config::serialize(snapshot));
        for (const auto& [key, value] : config::parse_key_values(lines)) manifest["config"][key] = value;
    }
    manifest["seed"] = seed;
    manifest["code_version"] = kCodeVersion;
    manifest["code_hash"] = fnv1a_hex(kCodeVersion);
    manifest["cell"] = {{"env", cfg.env},
                        {"algorithm", learners::to_string(cfg.algorithm)},
                        {"entropy_coef", cfg.train.update.surrogate.entropy_coef},
                        {"beta_or_eps", beta_or_eps(cfg.train.update)},
                        {"cell_id", cell_id(cfg)}};
    manifest["start_time"] = utc_now();

    try {
        fs::create_directories(dir);
        write_text(dir / "config.txt", config::serialize(snapshot));
        std::ofstream metrics(dir / "metrics.csv", std::ios::binary);
        if (!metrics) throw std::runtime_error("cannot write " + (dir / "metrics.csv").string());
        analytics::write_metrics_header(metrics);
        const auto result = learners::train(cfg.env, cfg.train, cfg.total_steps, seed,
                                            [&](const analytics::MetricsRecord& rec) {
                                                analytics::write_metrics_row(metrics, rec);
                                                metrics.flush();
                                            });
        if (!metrics) throw std::runtime_error("metrics write failed");
        nets::save_snapshot(dir / "policy.ckpt", result.model.policy, result.model.log_std);
        nets::save_snapshot(dir / "value.ckpt", result.model.value);
        if (!result.records.empty()) outcome.final_return = result.records.back().eval_return_mean;
        manifest["env_steps"] = result.env_steps;
        manifest["updates"] = result.updates;
        outcome.completed = true;
    } catch (const std::exception& e) {
        outcome.error = e.what();
        manifest["error"] = outcome.error;
    }
    manifest["end_time"] = utc_now();
    manifest["status"] = outcome.completed ? "completed" : "failed";
    try {
        fs::create_directories(dir);
        write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception& e) {
        outcome.completed = false;
        outcome.error += std::string(outcome.error.empty() ? "" : "; ") + e.what();
    }
    return outcome;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& task) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w)
        workers.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) task(i);
        });
    for (auto& t : workers) t.join();
}

namespace {

std::vector<RunOutcome> run_seeds(const config::ExperimentConfig& cfg, const fs::path& root, std::size_t jobs,
                                  std::ostream* log, std::mutex& log_mutex) {
    std::vector<RunOutcome> outcomes(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), jobs, [&](std::size_t i) {
        const auto seed = cfg.seeds[i];
        outcomes[i] = run_single(cfg, seed, run_dir(root, cfg.env, cfg.algorithm, seed));
        if (log) {
            std::lock_guard lock(log_mutex);
            const auto& o = outcomes[i];
            *log << (o.completed ? "done   " : "FAILED ") << o.dir.string();
            if (o.completed && o.final_return) *log << "  final_return=" << analytics::format_shortest(*o.final_return);
            if (!o.completed) *log << "  " << o.error;
            *log << '\n';
        }
    });
    return outcomes;
}

}  // namespace

std::vector<RunOutcome> run_experiment(const config::ExperimentConfig& cfg, std::size_t jobs, std::ostream* log) {
    cfg.validate();
    std::mutex log_mutex;
    return run_seeds(cfg, cfg.output_root, jobs, log, log_mutex);
}

GridAxis parse_grid_axis(std::string_view text) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos || eq == 0) throw std::invalid_argument("grid axis must look like key=v1,v2,...");
    GridAxis axis{std::string(text.substr(0, eq)), {}};
    std::string_view rest = text.substr(eq + 1);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto item = rest.substr(0, comma);
        if (item.empty()) throw std::invalid_argument("empty value in grid axis " + axis.key);
        axis.values.emplace_back(item);
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
        if (rest.empty()) throw std::invalid_argument("trailing comma in grid axis " + axis.key);
    }
    if (axis.values.empty()) throw std::invalid_argument("grid axis " + axis.key + " has no values");
    config::ExperimentConfig probe;
    apply_axis_value(probe, axis.key, axis.values.front());  // reject unknown keys early
    return axis;
}

void apply_axis_value(config::ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    if (key == "batch_size") {
        config::set_value(cfg, "rollout_len", value);
    } else if (key == "beta") {
        const auto a = cfg.algorithm;
        const bool penalized = a == Algorithm::trpo_kl || a == Algorithm::ppo_reg || a == Algorithm::bppo_reg;
        config::set_value(cfg, penalized ? "lambda_pen" : "beta", value);
    } else if (key == "seeds" || key == "output_root" || key == "algorithm" || key == "algo") {
        throw std::invalid_argument("'" + std::string(key) + "' cannot be a grid axis");
    } else {
        config::set_value(cfg, key, value);
    }
}

std::vector<std::vector<std::pair<std::string, std::string>>> expand_grid(const std::vector<GridAxis>& grid) {
    if (grid.empty()) throw std::invalid_argument("sweep needs at least one --grid axis");
    std::vector<std::vector<std::pair<std::string, std::string>>> cells{{}};
    for (const auto& axis : grid) {
        if (axis.values.empty()) throw std::invalid_argument("grid axis " + axis.key + " has no values");
        std::vector<std::vector<std::pair<std::string, std::string>>> next;
        for (const auto& cell : cells)
            for (const auto& v : axis.values) {
                next.push_back(cell);
                next.back().emplace_back(axis.key, v);
            }
        cells = std::move(next);
    }
    return cells;
}

std::vector<SweepCell> run_sweep(const config::ExperimentConfig& base, const std::vector<Algorithm>& algorithms,
                                 const std::vector<GridAxis>& grid, std::size_t jobs, std::ostream* log) {
    if (algorithms.empty()) throw std::invalid_argument("sweep needs at least one algorithm");
    const auto assignments = expand_grid(grid);

    struct Task {
        std::size_t cell;
        std::size_t algo;
        config::ExperimentConfig cfg;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    std::vector<SweepCell> cells(assignments.size());
    for (std::size_t c = 0; c < assignments.size(); ++c) {
        cells[c].index = c;
        cells[c].assignment = assignments[c];
        cells[c].dir = base.output_root / ("cell_" + std::to_string(c));
        for (std::size_t a = 0; a < algorithms.size(); ++a) {
            auto cfg = base;
            config::set_value(cfg, "algorithm", learners::to_string(algorithms[a]));
            for (const auto& [key, value] : assignments[c]) apply_axis_value(cfg, key, value);
            cfg.output_root = cells[c].dir;
            cfg.validate();
            cells[c].finals.emplace_back(algorithms[a], std::nullopt);
            for (auto seed : cfg.seeds) tasks.push_back({c, a, cfg, seed});
        }
    }

    std::vector<RunOutcome> outcomes(tasks.size());
    std::mutex log_mutex;
    parallel_for(tasks.size(), jobs, [&](std::size_t i) {
        const auto& t = tasks[i];
        outcomes[i] = run_single(t.cfg, t.seed, run_dir(t.cfg.output_root, t.cfg.env, t.cfg.algorithm, t.seed));
        if (log) {
            std::lock_guard lock(log_mutex);
            *log << (outcomes[i].completed ? "done   " : "FAILED ") << outcomes[i].dir.string();
            if (!outcomes[i].completed) *log << "  " << outcomes[i].error;
            *log << '\n';
        }
    });

    std::vector<std::vector<std::vector<double>>> finals(cells.size(), std::vector<std::vector<double>>(algorithms.size()));
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (outcomes[i].completed && outcomes[i].final_return)
            finals[tasks[i].cell][tasks[i].algo].push_back(*outcomes[i].final_return);
    for (std::size_t c = 0; c < cells.size(); ++c)
        for (std::size_t a = 0; a < algorithms.size(); ++a)
            if (!finals[c][a].empty()) cells[c].finals[a].second = analytics::iqm(finals[c][a]);

    fs::create_directories(base.output_root);
    std::ofstream out(base.output_root / "sweep_summary.csv", std::ios::binary);
    write_sweep_summary(out, grid, algorithms, cells);
    if (!out) throw std::runtime_error("cannot write sweep_summary.csv");
    return cells;
}

void write_sweep_summary(std::ostream& out, const std::vector<GridAxis>& grid, const std::vector<Algorithm>& algorithms,
                         const std::vector<SweepCell>& cells) {
    out << "cell";
    for (const auto& axis : grid) out << ',' << axis.key;
    for (auto a : algorithms) out << ",final_" << learners::to_string(a);
    out << '\n';
    for (const auto& cell : cells) {
        out << cell.index;
        for (const auto& [key, value] : cell.assignment) out << ',' << value;
        for (const auto& [algo, final] : cell.finals) {
            out << ',';
            if (final) out << analytics::format_number(*final);
        }
        out << '\n';
    }
}

analytics::AggregateResult aggregate_directory(const fs::path& root, const fs::path& out_dir, std::ostream* log) {
    const auto dirs = analytics::find_run_dirs(root);
    auto result = analytics::aggregate_runs(dirs);
    if (log)
        for (const auto& w : result.warnings) *log << "warning: " << w << '\n';
    fs::create_directories(out_dir);
    std::ofstream report(out_dir / "iqm_report.csv", std::ios::binary);
    analytics::write_iqm_report(report, result.rows);
    std::ofstream curves(out_dir / "curves.csv", std::ios::binary);
    analytics::write_curves(curves, result.curves);
    if (!report || !curves) throw std::runtime_error("cannot write aggregate reports under " + out_dir.string());
    return result;
}

}  // namespace sqrt_trust::runner
