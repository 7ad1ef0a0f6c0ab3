#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sqrt_trust/learners.hpp"

namespace sqrt_trust::config {

/// Everything needed to reproduce a set of runs.
struct ExperimentConfig {
    std::string env = "cartpole";
    learners::Algorithm algorithm = learners::Algorithm::bppo;
    std::vector<std::uint64_t> seeds = {0};
    std::size_t total_steps = 1'000'000;
    learners::TrainConfig train;
    std::filesystem::path output_root = "runs";

    /// Throws std::invalid_argument on an inconsistent config.
    void validate() const;
};

/// Sets one field from its textual form; throws std::invalid_argument on an
/// unknown key or a malformed value.
void set_value(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Keys accepted by set_value(), in serialization order.
const std::vector<std::string>& known_keys();

/// Flat `key = value` lines. Blank lines and `#` comments are skipped.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in);
void apply_file(ExperimentConfig& config, const std::filesystem::path& path);

/// Text that parses back to an identical config.
std::string serialize(const ExperimentConfig& config);
ExperimentConfig parse(std::string_view text);

/// "3", "0..3" (inclusive) or comma-separated mixes like "0..2,7".
std::vector<std::uint64_t> parse_seeds(std::string_view text);

bool parse_bool(std::string_view text);
double parse_double(std::string_view text);
std::uint64_t parse_uint(std::string_view text);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace sqrt_trust::config
