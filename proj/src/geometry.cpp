#include "sqrt_trust/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sqrt_trust::geometry {

namespace {

void require_finite(double x, const char* what) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + " must be finite");
}

void require_non_empty(std::size_t n, const char* what) {
    if (n == 0) throw std::invalid_argument(std::string(what) + ": empty batch");
}

double normal_pdf(double x, double mean, double std) {
    const double z = (x - mean) / std;
    return std::exp(-0.5 * z * z) / (std * std::sqrt(2.0 * std::numbers::pi));
}

double simpson(const std::function<double(double)>& f, double a, double b, double fa,
               double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double err = left + right - whole;
    if (depth <= 0 || std::abs(err) <= 15.0 * tol) return left + right + err / 15.0;
    return simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

std::string_view to_string(RegularizerKind kind) {
    switch (kind) {
        case RegularizerKind::none: return "none";
        case RegularizerKind::kl_forward: return "kl_forward";
        case RegularizerKind::kl_reverse: return "kl_reverse";
        case RegularizerKind::js: return "js";
        case RegularizerKind::chi2: return "chi2";
        case RegularizerKind::jeffreys: return "jeffreys";
        case RegularizerKind::bc: return "bc";
    }
    return "none";
}

RegularizerKind parse_regularizer(std::string_view name) {
    if (name == "none") return RegularizerKind::none;
    if (name == "kl_forward" || name == "kl") return RegularizerKind::kl_forward;
    if (name == "kl_reverse" || name == "reverse_kl") return RegularizerKind::kl_reverse;
    if (name == "js") return RegularizerKind::js;
    if (name == "chi2" || name == "chi") return RegularizerKind::chi2;
    if (name == "jeffreys") return RegularizerKind::jeffreys;
    if (name == "bc") return RegularizerKind::bc;
    throw std::invalid_argument("unknown regularizer kind: " + std::string(name));
}

void SurrogateConfig::validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1)");
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
    if (!(lambda_pen >= 0.0)) throw std::invalid_argument("lambda_pen must be >= 0");
    if (!(entropy_coef >= 0.0)) throw std::invalid_argument("entropy_coef must be >= 0");
    if (saturation_c && !(*saturation_c > 0.0))
        throw std::invalid_argument("saturation_c must be > 0");
}

void GaussianSpec::validate() const {
    if (mean.size() != std.size())
        throw std::invalid_argument("GaussianSpec: mean/std dimension mismatch");
    for (double s : std)
        if (!(s > 0.0) || !std::isfinite(s))
            throw std::invalid_argument("GaussianSpec: std must be finite and > 0");
}

LogRatio log_ratio(double logp_new, double logp_old) {
    require_finite(logp_new, "logp_new");
    require_finite(logp_old, "logp_old");
    return {logp_new - logp_old};
}

RatioPair sqrt_ratio(LogRatio delta) {
    require_finite(delta.delta, "delta");
    double half = 0.5 * delta.delta;
    bool overflow = false;
    if (std::abs(half) > kHalfLogRatioGuard) {
        half = std::copysign(kHalfLogRatioGuard, half);
        overflow = true;
    }
    const double q = std::exp(half);
    return {q * q, q, overflow};
}

LogRatio saturate_log_ratio(LogRatio delta, double c) {
    if (!(c > 0.0)) throw std::invalid_argument("saturation bound c must be > 0");
    return {c * std::tanh(delta.delta / c)};
}

double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

double bppo_surrogate(double q, double adv, double epsilon) {
    return 2.0 * std::min(q * adv, clip(q, 1.0 - epsilon, 1.0 + epsilon) * adv);
}

double ppo_surrogate(double r, double adv, double epsilon) {
    return std::min(r * adv, clip(r, 1.0 - epsilon, 1.0 + epsilon) * adv);
}

double btrpo_objective(double q, double adv, double beta) {
    const double d = 1.0 - q;
    return 2.0 * q * adv - beta * d * d;
}

double hellinger_penalty(std::span<const double> q_batch) {
    require_non_empty(q_batch.size(), "hellinger_penalty");
    double sum = 0.0;
    for (double q : q_batch) sum += (1.0 - q) * (1.0 - q);
    return sum / static_cast<double>(q_batch.size());
}

double divergence_term(RegularizerKind kind, double r, double delta) {
    switch (kind) {
        case RegularizerKind::kl_forward: return -delta;
        case RegularizerKind::kl_reverse: return r * delta;
        case RegularizerKind::chi2: return (r - 1.0) * (r - 1.0);
        case RegularizerKind::js:
            return 0.5 * std::log(2.0 / (1.0 + r)) + 0.5 * r * std::log(2.0 * r / (1.0 + r));
        case RegularizerKind::jeffreys: return (r - 1.0) * delta;
        case RegularizerKind::bc: return -std::exp(0.5 * delta);
        case RegularizerKind::none: break;
    }
    throw std::invalid_argument("divergence_penalty: no divergence for regularizer kind 'none'");
}

double divergence_penalty(RegularizerKind kind, std::span<const double> r_batch,
                          std::span<const double> delta_batch) {
    require_non_empty(r_batch.size(), "divergence_penalty");
    if (r_batch.size() != delta_batch.size())
        throw std::invalid_argument("divergence_penalty: r/delta length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < r_batch.size(); ++i)
        sum += divergence_term(kind, r_batch[i], delta_batch[i]);
    const double mean = sum / static_cast<double>(r_batch.size());
    // The BC term is stored as -q so that 1 + mean gives 1 - BC.
    return kind == RegularizerKind::bc ? 1.0 + mean : mean;
}

double bc_estimate(std::span<const double> q_batch) {
    require_non_empty(q_batch.size(), "bc_estimate");
    double sum = 0.0;
    for (double q : q_batch) sum += q;
    return sum / static_cast<double>(q_batch.size());
}

double gaussian_bc(const GaussianSpec& p, const GaussianSpec& g) {
    p.validate();
    g.validate();
    if (p.mean.size() != g.mean.size()) throw std::invalid_argument("gaussian_bc: dimension mismatch");
    double log_scale = 0.0;
    double exponent = 0.0;
    for (std::size_t i = 0; i < p.mean.size(); ++i) {
        const double vp = p.std[i] * p.std[i];
        const double vg = g.std[i] * g.std[i];
        const double diff = p.mean[i] - g.mean[i];
        log_scale += 0.5 * std::log(2.0 * p.std[i] * g.std[i] / (vp + vg));
        exponent += diff * diff / (4.0 * (vp + vg));
    }
    return std::exp(log_scale - exponent);
}

double gaussian_kl(const GaussianSpec& p, const GaussianSpec& g) {
    p.validate();
    g.validate();
    if (p.mean.size() != g.mean.size()) throw std::invalid_argument("gaussian_kl: dimension mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.mean.size(); ++i) {
        const double vp = p.std[i] * p.std[i];
        const double vg = g.std[i] * g.std[i];
        const double diff = p.mean[i] - g.mean[i];
        kl += std::log(g.std[i] / p.std[i]) + (vp + diff * diff) / (2.0 * vg) - 0.5;
    }
    return kl;
}

double tail_bound(double t, double bc) {
    if (!(t > 1.0)) throw std::invalid_argument("tail_bound: t must be > 1");
    if (!(bc >= 0.0 && bc <= 1.0)) throw std::invalid_argument("tail_bound: bc must lie in [0, 1]");
    const double gap = std::sqrt(t) - 1.0;
    return 2.0 * (1.0 - bc) / (gap * gap);
}

double taylor_residual(double q) { return q * q - (1.0 + 2.0 * (q - 1.0)); }

namespace dlog {

// dq/d delta = q / 2 and dr/d delta = r. The clipped branch has zero slope.

double bppo_surrogate(double q, double adv, double epsilon) {
    const double clipped = clip(q, 1.0 - epsilon, 1.0 + epsilon);
    if (clipped == q || q * adv <= clipped * adv) return q * adv;
    return 0.0;
}

double ppo_surrogate(double r, double adv, double epsilon) {
    const double clipped = clip(r, 1.0 - epsilon, 1.0 + epsilon);
    if (clipped == r || r * adv <= clipped * adv) return r * adv;
    return 0.0;
}

double btrpo_objective(double q, double adv, double beta) {
    return q * adv + beta * (1.0 - q) * q;
}

double divergence_term(RegularizerKind kind, double r, double delta) {
    switch (kind) {
        case RegularizerKind::kl_forward: return -1.0;
        case RegularizerKind::kl_reverse: return r * (delta + 1.0);
        case RegularizerKind::chi2: return 2.0 * (r - 1.0) * r;
        case RegularizerKind::js: return 0.5 * r * std::log(2.0 * r / (1.0 + r));
        case RegularizerKind::jeffreys: return r * delta + (r - 1.0);
        case RegularizerKind::bc: return -0.5 * std::exp(0.5 * delta);
        case RegularizerKind::none: break;
    }
    throw std::invalid_argument("divergence_term: no divergence for regularizer kind 'none'");
}

double saturate(double delta, double c) {
    const double t = std::tanh(delta / c);
    return 1.0 - t * t;
}

}  // namespace dlog

double integrate(const std::function<double(double)>& f, double a, double b, double tol,
                 int max_depth) {
    const double fa = f(a);
    const double fb = f(b);
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

double gaussian_bc_quadrature(double mean_p, double std_p, double mean_g, double std_g) {
    const double center = 0.5 * (mean_p + mean_g);
    const double half_width = 12.0 * std::max(std_p, std_g);
    auto integrand = [&](double x) {
        return std::sqrt(normal_pdf(x, mean_p, std_p) * normal_pdf(x, mean_g, std_g));
    };
    // Split at the midpoint so a coarse initial Simpson pass cannot miss the mass.
    return integrate(integrand, center - half_width, center, 0.5e-10) +
           integrate(integrand, center, center + half_width, 0.5e-10);
}

}  // namespace sqrt_trust::geometry
