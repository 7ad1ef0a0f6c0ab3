#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "sqrt_trust/rng.hpp"

namespace sqrt_trust::nets {

/// Fully connected network: tanh on hidden layers, identity on the output.
///
/// Parameters live in one flat vector. Layer l stores its weight matrix
/// input-major (W[k * fan_out + j] connects input k to output j) followed by
/// its bias vector, so the forward pass accumulates every output in a fixed
/// input order regardless of how many samples are evaluated.
class Mlp {
public:
    Mlp() = default;
    /// All parameters zero.
    explicit Mlp(std::vector<std::size_t> layer_dims);

    /// Uniform Glorot weights, zero biases, final layer scaled by `output_scale`.
    static Mlp glorot(std::vector<std::size_t> layer_dims, Rng& rng, double output_scale = 1.0);

    const std::vector<std::size_t>& layer_dims() const { return dims_; }
    std::size_t input_dim() const { return dims_.front(); }
    std::size_t output_dim() const { return dims_.back(); }
    std::size_t num_layers() const { return dims_.size() - 1; }
    std::size_t parameter_count() const { return params_.size(); }

    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    std::span<double> weights(std::size_t layer);
    std::span<double> biases(std::size_t layer);

    /// Activations of one forward pass over `rows` inputs stored row-major,
    /// reused by backward().
    struct Workspace {
        std::size_t rows = 0;
        std::vector<std::vector<double>> activations;  // [0] = input, back() = output
        std::vector<double> grad_a;
        std::vector<double> grad_b;
    };

    std::vector<double> forward(std::span<const double> input) const;
    /// Forward pass that keeps activations; returns a view of the output.
    std::span<const double> forward(std::span<const double> input, Workspace& ws) const;
    /// Forward pass over `rows` inputs laid out row-major. Each row gets
    /// exactly the value forward() would give it alone.
    std::span<const double> forward_batch(std::span<const double> inputs, std::size_t rows, Workspace& ws) const;

    /// Parameter gradient of <output_grad, forward(input)>.
    std::vector<double> backward(std::span<const double> input, std::span<const double> output_grad) const;
    /// Accumulates into `param_grad` using activations from the last
    /// forward call on `ws`. `output_grad` holds one row per input row.
    void backward(Workspace& ws, std::span<const double> output_grad, std::span<double> param_grad) const;

    bool operator==(const Mlp&) const = default;

private:
    std::vector<std::size_t> dims_;
    std::vector<std::size_t> offsets_;  // start of each layer's weights
    std::vector<double> params_;
};

/// Adam with bias correction. Gradients follow the minimization convention.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(std::size_t n, double lr) : m(n, 0.0), v(n, 0.0), learning_rate(lr) {}
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

double l2_norm(std::span<const double> v);
/// Rescales `grads` so its norm is at most `max_norm`; returns the norm before clipping.
double clip_grad_norm(std::span<double> grads, double max_norm);

/// Snapshot format: one JSON header line
///   {"format":"sqrt_trust.mlp","layer_dims":[...],"extra":k,"count":n}
/// followed by n = parameter_count + k little-endian IEEE-754 doubles
/// (network parameters, then `extra` trailing values such as log_std).
void save_snapshot(std::ostream& out, const Mlp& net, std::span<const double> extra = {});
void save_snapshot(const std::filesystem::path& path, const Mlp& net, std::span<const double> extra = {});

struct Snapshot {
    Mlp net;
    std::vector<double> extra;
};

Snapshot load_snapshot(std::istream& in);
Snapshot load_snapshot(const std::filesystem::path& path);

}  // namespace sqrt_trust::nets
