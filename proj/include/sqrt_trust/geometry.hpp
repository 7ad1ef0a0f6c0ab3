#pragma once

// Overlap geometry of policy updates: log-ratios, square-root ratios, the
// clipped/penalized surrogates built on them, divergence penalties estimated
// under the behavior policy, and closed-form Gaussian oracles.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sqrt_trust::geometry {

/// log pi_new(a|s) - log pi_old(a|s), in nats.
struct LogRatio {
    double delta = 0.0;
};

/// Likelihood ratio r and square-root ratio q = sqrt(r).
struct RatioPair {
    double r = 1.0;
    double q = 1.0;
    bool overflow = false;  ///< delta/2 hit the exponent guard
};

/// |delta/2| is clamped to this before exponentiation.
inline constexpr double kHalfLogRatioGuard = 30.0;

enum class RegularizerKind { none, kl_forward, kl_reverse, js, chi2, jeffreys, bc };

std::string_view to_string(RegularizerKind kind);
/// Accepts the canonical names plus a few aliases ("kl", "reverse_kl", "chi").
RegularizerKind parse_regularizer(std::string_view name);

struct SurrogateConfig {
    double epsilon = 0.2;
    double beta = 2.0;
    double lambda_pen = 0.1;
    double entropy_coef = 0.0;
    std::optional<double> saturation_c;
    RegularizerKind regularizer_kind = RegularizerKind::none;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

struct GaussianSpec {
    std::vector<double> mean;
    std::vector<double> std;

    void validate() const;
};

LogRatio log_ratio(double logp_new, double logp_old);
RatioPair sqrt_ratio(LogRatio delta);
LogRatio saturate_log_ratio(LogRatio delta, double c);

double bppo_surrogate(double q, double adv, double epsilon);
double ppo_surrogate(double r, double adv, double epsilon);
double btrpo_objective(double q, double adv, double beta);

/// mean((1 - q)^2)
double hellinger_penalty(std::span<const double> q_batch);
/// Monte-Carlo estimate under the behavior policy of the chosen divergence.
double divergence_penalty(RegularizerKind kind, std::span<const double> r_batch,
                          std::span<const double> delta_batch);
/// Bhattacharyya coefficient estimate: mean of q. Not clamped to [0, 1].
double bc_estimate(std::span<const double> q_batch);

double gaussian_bc(const GaussianSpec& p, const GaussianSpec& g);
/// KL(p || g) for diagonal Gaussians.
double gaussian_kl(const GaussianSpec& p, const GaussianSpec& g);

/// Pr(r >= t) <= 2 (1 - bc) / (sqrt(t) - 1)^2
double tail_bound(double t, double bc);
/// q^2 - (1 + 2 (q - 1)), the error of the first-order expansion of r in q.
double taylor_residual(double q);

double clip(double x, double lo, double hi);

// Derivatives with respect to the log-ratio, used by the learners.
namespace dlog {

double bppo_surrogate(double q, double adv, double epsilon);
double ppo_surrogate(double r, double adv, double epsilon);
double btrpo_objective(double q, double adv, double beta);
/// d/d delta of the per-sample term whose batch mean is divergence_penalty.
double divergence_term(RegularizerKind kind, double r, double delta);
double saturate(double delta, double c);

}  // namespace dlog

/// Per-sample term of divergence_penalty (before averaging).
double divergence_term(RegularizerKind kind, double r, double delta);

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-10, int max_depth = 50);

/// 1-D Bhattacharyya coefficient by quadrature of sqrt(p g) over
/// [mean_mid - 12 sigma_max, mean_mid + 12 sigma_max].
double gaussian_bc_quadrature(double mean_p, double std_p, double mean_g, double std_g);

}  // namespace sqrt_trust::geometry
