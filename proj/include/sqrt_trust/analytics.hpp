#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sqrt_trust::analytics {

/// Summary of likelihood ratios r over one batch.
struct RatioStats {
    double mean_r = 1.0;
    double p99_r = 1.0;
    double max_r = 1.0;
    double min_r = 1.0;
    std::size_t n = 0;
};

/// Linear interpolation between closest ranks at index p * (n - 1).
double percentile(std::span<const double> values, double p);

RatioStats ratio_stats(std::span<const double> r_batch);

/// Interquartile mean with fractional weights: sorted element i covers mass
/// [i, i + 1), and only the mass in [n/4, 3n/4] is averaged.
double iqm(std::span<const double> values);

/// Mean of max(0, target - v) / |target| (unnormalized when target == 0).
double optimality_gap(std::span<const double> values, double target);

/// Per-environment optimality-gap target.
double default_target(std::string_view env);

/// 17 significant digits, as written to every CSV.
std::string format_number(double value);
/// Shortest text that parses back to the same double.
std::string format_shortest(double value);

/// One row of a run's metrics CSV.
struct MetricsRecord {
    std::size_t env_steps = 0;
    std::size_t update_idx = 0;
    std::optional<double> eval_return_mean;
    std::optional<double> eval_return_std;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double penalty = 0.0;
    double ratio_mean = 1.0;
    double ratio_p99 = 1.0;
    double ratio_max = 1.0;
    double ratio_min = 1.0;
    double q_mean = 1.0;
    double grad_norm = 0.0;
};

inline constexpr std::string_view kMetricsHeader =
    "env_steps,update_idx,eval_return_mean,eval_return_std,policy_loss,value_loss,entropy,penalty,"
    "ratio_mean,ratio_p99,ratio_max,ratio_min,q_mean,grad_norm";

void write_metrics_header(std::ostream& out);
/// Evaluation columns are left empty on rows without an evaluation.
void write_metrics_row(std::ostream& out, const MetricsRecord& record);
/// Throws std::runtime_error on a malformed file.
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

/// Identity of the hyper-parameter cell a run belongs to, read from its manifest.
struct RunInfo {
    std::filesystem::path dir;
    std::string env;
    std::string algorithm;
    double entropy_coef = 0.0;
    double beta_or_eps = 0.0;
    std::string cell_id;
    std::uint64_t seed = 0;
};

/// Reads `<dir>/manifest.json`; returns nullopt unless it describes a completed run.
std::optional<RunInfo> read_run_info(const std::filesystem::path& dir);

struct IqmRow {
    std::string env;
    std::string algorithm;
    double entropy_coef = 0.0;
    double beta_or_eps = 0.0;
    std::string cell_id;
    double iqm = 0.0;
    double optimality_gap = 0.0;
    std::vector<double> finals;  ///< per-seed final evaluation returns

    std::size_t n_seeds() const { return finals.size(); }
};

struct CurvePoint {
    std::string env;
    std::string algorithm;
    std::string cell_id;
    std::size_t env_steps = 0;
    double return_mean = 0.0;
    double return_std = 0.0;
    std::size_t n_runs = 0;
};

struct AggregateResult {
    std::vector<IqmRow> rows;
    std::vector<CurvePoint> curves;
    std::vector<std::string> warnings;
};

/// Groups runs by (env, algorithm, cell) and computes final-evaluation IQM,
/// optimality gap and seed-averaged learning curves. Runs with missing or
/// corrupt metrics are skipped with a warning; throws if none are usable.
AggregateResult aggregate_runs(const std::vector<std::filesystem::path>& run_dirs);

/// Every directory under `root` holding a manifest.json.
std::vector<std::filesystem::path> find_run_dirs(const std::filesystem::path& root);

void write_iqm_report(std::ostream& out, const std::vector<IqmRow>& rows);
void write_curves(std::ostream& out, const std::vector<CurvePoint>& curves);

}  // namespace sqrt_trust::analytics
