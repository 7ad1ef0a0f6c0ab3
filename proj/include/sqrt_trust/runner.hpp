#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sqrt_trust/config.hpp"
#include "sqrt_trust/learners.hpp"

namespace sqrt_trust::runner {

inline constexpr std::string_view kCodeVersion = "sqrt_trust 1.0.0";

/// 64-bit FNV-1a, as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

/// Hyper-parameter value reported next to the algorithm: beta for btrpo,
/// lambda_pen for penalized methods, epsilon for the clipped ones.
double beta_or_eps(const learners::UpdateConfig& update);

/// Hash of every setting except seeds and output location.
std::string cell_id(const config::ExperimentConfig& config);

std::filesystem::path run_dir(const std::filesystem::path& root, std::string_view env, learners::Algorithm algorithm,
                              std::uint64_t seed);

struct RunOutcome {
    std::uint64_t seed = 0;
    std::filesystem::path dir;
    bool completed = false;
    std::string error;
    std::optional<double> final_return;
};

/// One seed into `dir`: config.txt, metrics.csv, checkpoint files, then
/// manifest.json (written last, once). Never throws for training failures;
/// they are recorded in the manifest and the outcome.
RunOutcome run_single(const config::ExperimentConfig& config, std::uint64_t seed, const std::filesystem::path& dir);

/// Runs `n` independent tasks on up to `jobs` threads.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& task);

/// Every seed of `config` under `<output_root>/<env>/<algo>/seed<k>/`.
std::vector<RunOutcome> run_experiment(const config::ExperimentConfig& config, std::size_t jobs = 1,
                                       std::ostream* log = nullptr);

struct GridAxis {
    std::string key;
    std::vector<std::string> values;
};

/// "key=v1,v2,..." with key among epsilon, beta, lr, batch_size,
/// entropy_coef or any config key.
GridAxis parse_grid_axis(std::string_view text);

/// Applies one grid assignment. `batch_size` sets the rollout length and
/// `beta` sets lambda_pen for KL-penalized and regularized algorithms.
void apply_axis_value(config::ExperimentConfig& config, std::string_view key, std::string_view value);

/// Cartesian product, first axis varying slowest. Throws on an empty grid.
std::vector<std::vector<std::pair<std::string, std::string>>> expand_grid(const std::vector<GridAxis>& grid);

struct SweepCell {
    std::size_t index = 0;
    std::vector<std::pair<std::string, std::string>> assignment;
    std::vector<std::pair<learners::Algorithm, std::optional<double>>> finals;  ///< IQM of final returns
    std::filesystem::path dir;
};

/// Runs every (cell, algorithm, seed) under `<output_root>/cell_<i>/` and
/// writes `<output_root>/sweep_summary.csv`.
std::vector<SweepCell> run_sweep(const config::ExperimentConfig& base, const std::vector<learners::Algorithm>& algorithms,
                                 const std::vector<GridAxis>& grid, std::size_t jobs = 1, std::ostream* log = nullptr);

void write_sweep_summary(std::ostream& out, const std::vector<GridAxis>& grid,
                         const std::vector<learners::Algorithm>& algorithms, const std::vector<SweepCell>& cells);

/// Writes iqm_report.csv and curves.csv under `out_dir`; warnings go to `log`.
/// Throws std::runtime_error when `root` holds no completed run.
analytics::AggregateResult aggregate_directory(const std::filesystem::path& root, const std::filesystem::path& out_dir,
                                               std::ostream* log = nullptr);

}  // namespace sqrt_trust::runner
