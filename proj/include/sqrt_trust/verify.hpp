#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace sqrt_trust::verify {

struct Options {
    /// Relative perturbation applied to the closed-form Bhattacharyya
    /// coefficient, for checking that the suite notices a broken formula.
    double perturb_bc = 0.0;
    std::uint64_t seed = 20240601;
    std::size_t mc_samples = 1'000'000;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct Check {
    std::string name;
    std::string description;
    std::function<CheckResult(const Options&)> run;
};

const std::vector<Check>& checks();

/// |a - b| / max(|a|, |b|, 1e-6)
double relative_error(double a, double b);

/// Central-difference gradient of f at x with step h.
std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double h = 1e-5);

/// Runs the checks whose names are listed (all when empty).
std::vector<CheckResult> run(const Options& options, const std::vector<std::string>& only = {});

void print_table(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace sqrt_trust::verify
