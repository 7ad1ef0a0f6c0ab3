#include "sqrt_trust/analytics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

namespace sqrt_trust::analytics {

namespace fs = std::filesystem;

double percentile(std::span<const double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile of empty batch");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("percentile: p must lie in [0, 1]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double rank = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    if (frac == 0.0) return sorted[lo];
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

RatioStats ratio_stats(std::span<const double> r_batch) {
    if (r_batch.empty()) throw std::invalid_argument("ratio_stats of empty batch");
    RatioStats s;
    s.n = r_batch.size();
    const auto [mn, mx] = std::minmax_element(r_batch.begin(), r_batch.end());
    s.min_r = *mn;
    s.max_r = *mx;
    s.mean_r = std::accumulate(r_batch.begin(), r_batch.end(), 0.0) / static_cast<double>(s.n);
    // Rounding in the sum can push the mean a hair outside [min, max].
    s.mean_r = std::clamp(s.mean_r, s.min_r, s.max_r);
    s.p99_r = percentile(r_batch, 0.99);
    return s;
}

double iqm(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("iqm of empty vector");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    const double lo = n / 4.0;
    const double hi = n - lo;
    double total = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double start = std::max(static_cast<double>(i), lo);
        const double end = std::min(static_cast<double>(i + 1), hi);
        if (end > start) total += (end - start) * sorted[i];
    }
    const double result = total / (hi - lo);
    return std::clamp(result, sorted.front(), sorted.back());
}

double optimality_gap(std::span<const double> values, double target) {
    if (values.empty()) throw std::invalid_argument("optimality_gap of empty vector");
    double sum = 0.0;
    for (double v : values) sum += std::max(0.0, target - v);
    const double mean = sum / static_cast<double>(values.size());
    return target != 0.0 ? mean / std::abs(target) : mean;
}

double default_target(std::string_view env) {
    if (env == "cartpole") return 500.0;
    if (env == "frozenlake") return 1.0;
    if (env == "mountaincar_continuous") return 93.0;
    throw std::invalid_argument("no optimality-gap target for environment " + std::string(env));
}

std::string format_number(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::string format_shortest(double value) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

void write_metrics_header(std::ostream& out) { out << kMetricsHeader << '\n'; }

void write_metrics_row(std::ostream& out, const MetricsRecord& r) {
    auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
    out << r.env_steps << ',' << r.update_idx << ',' << opt(r.eval_return_mean) << ',' << opt(r.eval_return_std)
        << ',' << format_number(r.policy_loss) << ',' << format_number(r.value_loss) << ','
        << format_number(r.entropy) << ',' << format_number(r.penalty) << ',' << format_number(r.ratio_mean)
        << ',' << format_number(r.ratio_p99) << ',' << format_number(r.ratio_max) << ','
        << format_number(r.ratio_min) << ',' << format_number(r.q_mean) << ',' << format_number(r.grad_norm)
        << '\n';
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::runtime_error("trailing characters in number '" + s + "'");
    return v;
}

std::size_t parse_size(const std::string& s) {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::runtime_error("trailing characters in integer '" + s + "'");
    return static_cast<std::size_t>(v);
}

}  // namespace

std::vector<MetricsRecord> read_metrics(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
        throw std::runtime_error(path.string() + ": unexpected metrics header");
    std::vector<MetricsRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 14)
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 14 fields");
        try {
            MetricsRecord r;
            r.env_steps = parse_size(f[0]);
            r.update_idx = parse_size(f[1]);
            if (!f[2].empty()) r.eval_return_mean = parse_double(f[2]);
            if (!f[3].empty()) r.eval_return_std = parse_double(f[3]);
            r.policy_loss = parse_double(f[4]);
            r.value_loss = parse_double(f[5]);
            r.entropy = parse_double(f[6]);
            r.penalty = parse_double(f[7]);
            r.ratio_mean = parse_double(f[8]);
            r.ratio_p99 = parse_double(f[9]);
            r.ratio_max = parse_double(f[10]);
            r.ratio_min = parse_double(f[11]);
            r.q_mean = parse_double(f[12]);
            r.grad_norm = parse_double(f[13]);
            records.push_back(r);
        } catch (const std::logic_error& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

std::optional<RunInfo> read_run_info(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) return std::nullopt;
    const auto manifest = nlohmann::json::parse(in, nullptr, false);
    if (manifest.is_discarded() || manifest.value("status", "") != "completed") return std::nullopt;
    const auto& cell = manifest.at("cell");
    RunInfo info;
    info.dir = dir;
    info.env = cell.at("env").get<std::string>();
    info.algorithm = cell.at("algorithm").get<std::string>();
    info.entropy_coef = cell.at("entropy_coef").get<double>();
    info.beta_or_eps = cell.at("beta_or_eps").get<double>();
    info.cell_id = cell.at("cell_id").get<std::string>();
    info.seed = manifest.at("seed").get<std::uint64_t>();
    return info;
}

std::vector<fs::path> find_run_dirs(const fs::path& root) {
    std::vector<fs::path> dirs;
    if (!fs::exists(root)) return dirs;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file() && entry.path().filename() == "manifest.json")
            dirs.push_back(entry.path().parent_path());
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

namespace {

struct LoadedRun {
    RunInfo info;
    std::vector<std::pair<std::size_t, double>> evals;  // (env_steps, eval_return_mean)
};

double population_std(std::span<const double> v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

AggregateResult aggregate_runs(const std::vector<fs::path>& run_dirs) {
    AggregateResult result;
    using Key = std::tuple<std::string, std::string, std::string>;  // env, algorithm, cell_id
    std::map<Key, std::vector<LoadedRun>> groups;

    for (const auto& dir : run_dirs) {
        std::optional<RunInfo> info;
        try {
            info = read_run_info(dir);
        } catch (const std::exception& e) {
            result.warnings.push_back(dir.string() + ": unreadable manifest (" + e.what() + ")");
            continue;
        }
        if (!info) {
            result.warnings.push_back(dir.string() + ": not a completed run, skipped");
            continue;
        }
        LoadedRun run{*info, {}};
        try {
            for (const auto& rec : read_metrics(dir / "metrics.csv"))
                if (rec.eval_return_mean) run.evals.emplace_back(rec.env_steps, *rec.eval_return_mean);
        } catch (const std::exception& e) {
            result.warnings.push_back(dir.string() + ": corrupt metrics, skipped (" + e.what() + ")");
            continue;
        }
        if (run.evals.empty()) {
            result.warnings.push_back(dir.string() + ": no evaluation rows, skipped");
            continue;
        }
        groups[{info->env, info->algorithm, info->cell_id}].push_back(std::move(run));
    }
    if (groups.empty()) throw std::runtime_error("aggregate_runs: no usable completed runs");

    for (auto& [key, runs] : groups) {
        const auto& [env, algorithm, cell_id] = key;
        std::sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) { return a.info.seed < b.info.seed; });

        IqmRow row;
        row.env = env;
        row.algorithm = algorithm;
        row.cell_id = cell_id;
        row.entropy_coef = runs.front().info.entropy_coef;
        row.beta_or_eps = runs.front().info.beta_or_eps;
        for (const auto& run : runs) row.finals.push_back(run.evals.back().second);
        row.iqm = iqm(row.finals);
        double target = 0.0;
        try {
            target = default_target(env);
        } catch (const std::invalid_argument&) {
            target = 0.0;
        }
        row.optimality_gap = optimality_gap(row.finals, target);
        result.rows.push_back(std::move(row));

        // Step grid: union of evaluation points; each run contributes its most
        // recent evaluation at or before the grid point.
        std::vector<std::size_t> grid;
        for (const auto& run : runs)
            for (const auto& [steps, ret] : run.evals) grid.push_back(steps);
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        for (std::size_t steps : grid) {
            std::vector<double> values;
            for (const auto& run : runs) {
                auto it = std::upper_bound(run.evals.begin(), run.evals.end(), steps,
                                           [](std::size_t s, const auto& e) { return s < e.first; });
                if (it != run.evals.begin()) values.push_back(std::prev(it)->second);
            }
            if (values.empty()) continue;
            CurvePoint point{env, algorithm, cell_id, steps, 0.0, 0.0, values.size()};
            point.return_mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
            point.return_std = population_std(values);
            result.curves.push_back(std::move(point));
        }
    }
    return result;
}

void write_iqm_report(std::ostream& out, const std::vector<IqmRow>& rows) {
    out << "env,algorithm,entropy_coef,beta_or_eps,iqm,optimality_gap,n_seeds,cell_id\n";
    for (const auto& r : rows)
        out << r.env << ',' << r.algorithm << ',' << format_number(r.entropy_coef) << ','
            << format_number(r.beta_or_eps) << ',' << format_number(r.iqm) << ','
            << format_number(r.optimality_gap) << ',' << r.n_seeds() << ',' << r.cell_id << '\n';
}

void write_curves(std::ostream& out, const std::vector<CurvePoint>& curves) {
    out << "env,algorithm,env_steps,return_mean,return_std,cell_id\n";
    for (const auto& c : curves)
        out << c.env << ',' << c.algorithm << ',' << c.env_steps << ',' << format_number(c.return_mean) << ','
            << format_number(c.return_std) << ',' << c.cell_id << '\n';
}

}  // namespace sqrt_trust::analytics
