#include "sqrt_trust/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "sqrt_trust/analytics.hpp"
#include "sqrt_trust/envs.hpp"

namespace sqrt_trust::config {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
    throw std::invalid_argument("invalid value '" + std::string(value) + "' for " + std::string(key));
}

std::vector<std::size_t> parse_sizes(std::string_view text) {
    std::vector<std::size_t> out;
    for (auto part : split(text, ',')) out.push_back(static_cast<std::size_t>(parse_uint(part)));
    return out;
}

template <class T>
std::string join(const std::vector<T>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
    return out;
}

}  // namespace

bool parse_bool(std::string_view text) {
    text = trim(text);
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw std::invalid_argument("not a boolean: '" + std::string(text) + "'");
}

double parse_double(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
        throw std::invalid_argument("not a number: '" + std::string(text) + "'");
    return value;
}

std::uint64_t parse_uint(std::string_view text) {
    text = trim(text);
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
        throw std::invalid_argument("not a non-negative integer: '" + std::string(text) + "'");
    return value;
}

std::vector<std::uint64_t> parse_seeds(std::string_view text) {
    std::vector<std::uint64_t> seeds;
    for (auto part : split(text, ',')) {
        if (const auto dots = part.find(".."); dots != std::string_view::npos) {
            const auto lo = parse_uint(part.substr(0, dots));
            const auto hi = parse_uint(part.substr(dots + 2));
            if (hi < lo) throw std::invalid_argument("empty seed range '" + std::string(part) + "'");
            for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
        } else {
            seeds.push_back(parse_uint(part));
        }
    }
    return seeds;
}

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "env", "algorithm", "seeds", "total_steps", "output_root",
        "epsilon", "beta", "lambda_pen", "regularizer", "entropy_coef", "saturation_c",
        "epochs", "minibatch_size", "value_coef", "max_grad_norm", "normalize_advantages", "per_minibatch_normalization",
        "allow_zero_beta", "rollout_len", "gamma", "lambda_gae", "lr", "hidden", "scale_observations",
        "eval_every", "eval_episodes"};
    return keys;
}

void set_value(ExperimentConfig& c, std::string_view key, std::string_view raw) {
    const auto value = trim(raw);
    auto& u = c.train.update;
    auto& s = u.surrogate;
    try {
        if (key == "env") {
            envs::env_spec(value);  // rejects unknown names
            c.env = std::string(value);
        } else if (key == "algorithm" || key == "algo") {
            u.algorithm = c.algorithm = learners::parse_algorithm(value);
        } else if (key == "seeds") {
            c.seeds = parse_seeds(value);
        } else if (key == "total_steps" || key == "steps") {
            c.total_steps = parse_uint(value);
        } else if (key == "output_root") {
            c.output_root = std::string(value);
        } else if (key == "epsilon") {
            s.epsilon = parse_double(value);
        } else if (key == "beta") {
            s.beta = parse_double(value);
        } else if (key == "lambda_pen") {
            s.lambda_pen = parse_double(value);
        } else if (key == "regularizer") {
            s.regularizer_kind = geometry::parse_regularizer(value);
        } else if (key == "entropy_coef") {
            s.entropy_coef = parse_double(value);
        } else if (key == "saturation_c") {
            if (value.empty() || value == "none" || value == "off") s.saturation_c.reset();
            else s.saturation_c = parse_double(value);
        } else if (key == "epochs") {
            u.epochs = parse_uint(value);
        } else if (key == "minibatch_size") {
            u.minibatch_size = parse_uint(value);
        } else if (key == "value_coef") {
            u.value_coef = parse_double(value);
        } else if (key == "max_grad_norm") {
            u.max_grad_norm = parse_double(value);
        } else if (key == "normalize_advantages") {
            u.normalize_advantages = parse_bool(value);
        } else if (key == "per_minibatch_normalization") {
            u.per_minibatch_normalization = parse_bool(value);
        } else if (key == "allow_zero_beta") {
            u.allow_zero_beta = parse_bool(value);
        } else if (key == "rollout_len") {
            c.train.rollout_len = parse_uint(value);
        } else if (key == "gamma") {
            c.train.gamma = parse_double(value);
        } else if (key == "lambda_gae") {
            c.train.lambda_gae = parse_double(value);
        } else if (key == "lr") {
            c.train.learning_rate = parse_double(value);
        } else if (key == "hidden") {
            c.train.hidden = parse_sizes(value);
        } else if (key == "scale_observations") {
            c.train.scale_observations = parse_bool(value);
        } else if (key == "eval_every") {
            c.train.eval_every = parse_uint(value);
        } else if (key == "eval_episodes") {
            c.train.eval_episodes = parse_uint(value);
        } else {
            throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
        }
    } catch (const std::invalid_argument& e) {
        if (std::string_view(e.what()).starts_with("unknown config key")) throw;
        bad_value(key, value);
    }
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto view = trim(line);
        if (view.empty() || view.front() == '#') continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
        const auto key = trim(view.substr(0, eq));
        if (key.empty()) throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
        out.emplace_back(std::string(key), std::string(trim(view.substr(eq + 1))));
    }
    return out;
}

void apply_file(ExperimentConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path.string());
    for (const auto& [key, value] : parse_key_values(in)) set_value(config, key, value);
}

std::string serialize(const ExperimentConfig& c) {
    const auto& u = c.train.update;
    const auto& s = u.surrogate;
    const auto num = analytics::format_shortest;
    const auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
    std::ostringstream out;
    const auto put = [&](std::string_view key, const std::string& value) { out << key << " = " << value << '\n'; };
    put("env", c.env);
    put("algorithm", std::string(learners::to_string(c.algorithm)));
    put("seeds", join(c.seeds));
    put("total_steps", std::to_string(c.total_steps));
    put("output_root", c.output_root.string());
    put("epsilon", num(s.epsilon));
    put("beta", num(s.beta));
    put("lambda_pen", num(s.lambda_pen));
    put("regularizer", std::string(geometry::to_string(s.regularizer_kind)));
    put("entropy_coef", num(s.entropy_coef));
    put("saturation_c", s.saturation_c ? num(*s.saturation_c) : "none");
    put("epochs", std::to_string(u.epochs));
    put("minibatch_size", std::to_string(u.minibatch_size));
    put("value_coef", num(u.value_coef));
    put("max_grad_norm", num(u.max_grad_norm));
    put("normalize_advantages", flag(u.normalize_advantages));
    put("per_minibatch_normalization", flag(u.per_minibatch_normalization));
    put("allow_zero_beta", flag(u.allow_zero_beta));
    put("rollout_len", std::to_string(c.train.rollout_len));
    put("gamma", num(c.train.gamma));
    put("lambda_gae", num(c.train.lambda_gae));
    put("lr", num(c.train.learning_rate));
    put("hidden", join(c.train.hidden));
    put("scale_observations", flag(c.train.scale_observations));
    put("eval_every", std::to_string(c.train.eval_every));
    put("eval_episodes", std::to_string(c.train.eval_episodes));
    return out.str();
}

ExperimentConfig parse(std::string_view text) {
    ExperimentConfig config;
    std::istringstream in{std::string(text)};
    for (const auto& [key, value] : parse_key_values(in)) set_value(config, key, value);
    return config;
}

void ExperimentConfig::validate() const {
    envs::env_spec(env);
    if (seeds.empty()) throw std::invalid_argument("seeds must be non-empty");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
        throw std::invalid_argument("seeds must be distinct");
    if (train.rollout_len == 0) throw std::invalid_argument("rollout_len must be >= 1");
    if (total_steps < train.rollout_len) throw std::invalid_argument("total_steps must be >= rollout_len");
    if (train.update.algorithm != algorithm) throw std::invalid_argument("algorithm mismatch in config");
    if (!(train.gamma >= 0.0 && train.gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
    if (!(train.lambda_gae >= 0.0 && train.lambda_gae <= 1.0)) throw std::invalid_argument("lambda_gae must lie in [0, 1]");
    if (!(train.learning_rate >= 0.0) || !std::isfinite(train.learning_rate))
        throw std::invalid_argument("lr must be finite and >= 0");
    if (train.hidden.empty() || std::count(train.hidden.begin(), train.hidden.end(), 0u))
        throw std::invalid_argument("hidden layers must be non-empty with positive widths");
    if (train.eval_every == 0) throw std::invalid_argument("eval_every must be >= 1");
    if (train.eval_episodes == 0) throw std::invalid_argument("eval_episodes must be >= 1");
    train.update.validate();
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return serialize(a) == serialize(b); }

}  // namespace sqrt_trust::config
