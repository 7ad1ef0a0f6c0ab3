#include "sqrt_trust/nets.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace sqrt_trust::nets {

Mlp::Mlp(std::vector<std::size_t> layer_dims) : dims_(std::move(layer_dims)) {
    if (dims_.size() < 2) throw std::invalid_argument("Mlp needs at least an input and an output layer");
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        if (dims_[l] == 0 || dims_[l + 1] == 0) throw std::invalid_argument("Mlp layer of width 0");
        offsets_.push_back(total);
        total += (dims_[l] + 1) * dims_[l + 1];
    }
    params_.assign(total, 0.0);
}

Mlp Mlp::glorot(std::vector<std::size_t> layer_dims, Rng& rng, double output_scale) {
    Mlp net(std::move(layer_dims));
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const double fan_in = static_cast<double>(net.dims_[l]);
        const double fan_out = static_cast<double>(net.dims_[l + 1]);
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        const double scale = l + 1 == net.num_layers() ? output_scale : 1.0;
        for (double& w : net.weights(l)) w = scale * rng.uniform(-limit, limit);
    }
    return net;
}

std::span<double> Mlp::weights(std::size_t layer) {
    return std::span<double>(params_).subspan(offsets_.at(layer), dims_[layer] * dims_[layer + 1]);
}

std::span<double> Mlp::biases(std::size_t layer) {
    return std::span<double>(params_).subspan(offsets_.at(layer) + dims_[layer] * dims_[layer + 1],
                                              dims_[layer + 1]);
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
    Workspace ws;
    const auto out = forward(input, ws);
    return {out.begin(), out.end()};
}

std::span<const double> Mlp::forward(std::span<const double> input, Workspace& ws) const {
    if (input.size() != input_dim()) throw std::invalid_argument("Mlp::forward: input dimension mismatch");
    return forward_batch(input, 1, ws);
}

namespace {

// y[s] = b + x[s] W for `rows` rows; four rows share each weight load. Every
// output is accumulated in the same k order whatever the row count.
void affine_rows(const double* w, const double* b, const double* x, std::size_t rows, std::size_t fan_in,
                 std::size_t fan_out, double* y) {
    std::size_t s = 0;
    for (; s + 4 <= rows; s += 4) {
        double* y0 = y + s * fan_out;
        double* y1 = y0 + fan_out;
        double* y2 = y1 + fan_out;
        double* y3 = y2 + fan_out;
        const double* x0 = x + s * fan_in;
        const double* x1 = x0 + fan_in;
        const double* x2 = x1 + fan_in;
        const double* x3 = x2 + fan_in;
        for (std::size_t j = 0; j < fan_out; ++j) y0[j] = y1[j] = y2[j] = y3[j] = b[j];
        for (std::size_t k = 0; k < fan_in; ++k) {
            const double* wk = w + k * fan_out;
            const double a0 = x0[k], a1 = x1[k], a2 = x2[k], a3 = x3[k];
            for (std::size_t j = 0; j < fan_out; ++j) {
                const double wj = wk[j];
                y0[j] += wj * a0;
                y1[j] += wj * a1;
                y2[j] += wj * a2;
                y3[j] += wj * a3;
            }
        }
    }
    for (; s < rows; ++s) {
        double* ys = y + s * fan_out;
        const double* xs = x + s * fan_in;
        for (std::size_t j = 0; j < fan_out; ++j) ys[j] = b[j];
        for (std::size_t k = 0; k < fan_in; ++k) {
            const double* wk = w + k * fan_out;
            const double a = xs[k];
            for (std::size_t j = 0; j < fan_out; ++j) ys[j] += wk[j] * a;
        }
    }
}

// Dot product with eight interleaved partial sums in a fixed order.
double dot(const double* a, const double* b, std::size_t n) {
    const std::size_t blocked = n - n % 8;
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    for (std::size_t j = 0; j < blocked; j += 8)
        for (std::size_t l = 0; l < 8; ++l) acc[l] += a[j + l] * b[j + l];
    double s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (std::size_t j = blocked; j < n; ++j) s += a[j] * b[j];
    return s;
}

}  // namespace

std::span<const double> Mlp::forward_batch(std::span<const double> inputs, std::size_t rows, Workspace& ws) const {
    if (rows == 0 || inputs.size() != rows * input_dim())
        throw std::invalid_argument("Mlp::forward_batch: input dimension mismatch");
    ws.rows = rows;
    ws.activations.resize(dims_.size());
    ws.activations[0].assign(inputs.begin(), inputs.end());
    for (std::size_t l = 0; l < num_layers(); ++l) {
        const std::size_t fan_in = dims_[l];
        const std::size_t fan_out = dims_[l + 1];
        const double* w = params_.data() + offsets_[l];
        auto& y = ws.activations[l + 1];
        y.resize(rows * fan_out);
        affine_rows(w, w + fan_in * fan_out, ws.activations[l].data(), rows, fan_in, fan_out, y.data());
        if (l + 1 < num_layers())
            for (double& v : y) v = std::tanh(v);
    }
    return ws.activations.back();
}

std::vector<double> Mlp::backward(std::span<const double> input, std::span<const double> output_grad) const {
    Workspace ws;
    forward(input, ws);
    std::vector<double> grad(parameter_count(), 0.0);
    backward(ws, output_grad, grad);
    return grad;
}

void Mlp::backward(Workspace& ws, std::span<const double> output_grad, std::span<double> param_grad) const {
    if (ws.activations.size() != dims_.size() || ws.rows == 0)
        throw std::logic_error("Mlp::backward called without a forward pass");
    const std::size_t rows = ws.rows;
    if (output_grad.size() != rows * output_dim())
        throw std::invalid_argument("Mlp::backward: output gradient dimension mismatch");
    if (param_grad.size() != parameter_count()) throw std::invalid_argument("Mlp::backward: gradient buffer size mismatch");

    ws.grad_a.assign(output_grad.begin(), output_grad.end());  // gradient w.r.t. pre-activation, row-major
    for (std::size_t l = num_layers(); l-- > 0;) {
        const std::size_t fan_in = dims_[l];
        const std::size_t fan_out = dims_[l + 1];
        const double* w = params_.data() + offsets_[l];
        double* gw = param_grad.data() + offsets_[l];
        double* gb = gw + fan_in * fan_out;
        const double* x = ws.activations[l].data();
        const double* g = ws.grad_a.data();

        for (std::size_t s = 0; s < rows; ++s)
            for (std::size_t j = 0; j < fan_out; ++j) gb[j] += g[s * fan_out + j];
        for (std::size_t k = 0; k < fan_in; ++k) {
            double* gwk = gw + k * fan_out;
            std::size_t s = 0;
            for (; s + 4 <= rows; s += 4) {
                const double a0 = x[s * fan_in + k], a1 = x[(s + 1) * fan_in + k];
                const double a2 = x[(s + 2) * fan_in + k], a3 = x[(s + 3) * fan_in + k];
                const double* g0 = g + s * fan_out;
                const double* g1 = g0 + fan_out;
                const double* g2 = g1 + fan_out;
                const double* g3 = g2 + fan_out;
                for (std::size_t j = 0; j < fan_out; ++j)
                    gwk[j] += (a0 * g0[j] + a1 * g1[j]) + (a2 * g2[j] + a3 * g3[j]);
            }
            for (; s < rows; ++s) {
                const double a = x[s * fan_in + k];
                const double* gs = g + s * fan_out;
                for (std::size_t j = 0; j < fan_out; ++j) gwk[j] += a * gs[j];
            }
        }
        if (l == 0) break;

        // Back through the weights, then through tanh.
        ws.grad_b.resize(rows * fan_in);
        for (std::size_t s = 0; s < rows; ++s) {
            const double* gs = g + s * fan_out;
            const double* xs = x + s * fan_in;
            double* out = ws.grad_b.data() + s * fan_in;
            for (std::size_t k = 0; k < fan_in; ++k) out[k] = dot(w + k * fan_out, gs, fan_out) * (1.0 - xs[k] * xs[k]);
        }
        std::swap(ws.grad_a, ws.grad_b);
    }
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / correction1;
        const double v_hat = state.v[i] / correction2;
        params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.eps);
    }
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double clip_grad_norm(std::span<double> grads, double max_norm) {
    const double norm = l2_norm(grads);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        for (double& g : grads) g *= scale;
    }
    return norm;
}

namespace {

void write_le(std::ostream& out, double value) {
    auto bits = std::bit_cast<std::uint64_t>(value);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
    out.write(bytes, 8);
}

double read_le(std::istream& in) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw std::runtime_error("snapshot: truncated parameter block");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_snapshot(std::ostream& out, const Mlp& net, std::span<const double> extra) {
    nlohmann::json header;
    header["format"] = "sqrt_trust.mlp";
    header["layer_dims"] = net.layer_dims();
    header["extra"] = extra.size();
    header["count"] = net.parameter_count() + extra.size();
    out << header.dump() << '\n';
    for (double p : net.params()) write_le(out, p);
    for (double p : extra) write_le(out, p);
    if (!out) throw std::runtime_error("snapshot: write failed");
}

void save_snapshot(const std::filesystem::path& path, const Mlp& net, std::span<const double> extra) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("snapshot: cannot open " + path.string());
    save_snapshot(out, net, extra);
}

Snapshot load_snapshot(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("snapshot: missing header");
    const auto header = nlohmann::json::parse(line);
    if (header.value("format", "") != "sqrt_trust.mlp") throw std::runtime_error("snapshot: unknown format");
    Snapshot snap{Mlp(header.at("layer_dims").get<std::vector<std::size_t>>()), {}};
    const auto extra = header.at("extra").get<std::size_t>();
    if (header.at("count").get<std::size_t>() != snap.net.parameter_count() + extra)
        throw std::runtime_error("snapshot: parameter count does not match layer_dims");
    for (double& p : snap.net.params()) p = read_le(in);
    snap.extra.resize(extra);
    for (double& p : snap.extra) p = read_le(in);
    return snap;
}

Snapshot load_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("snapshot: cannot open " + path.string());
    return load_snapshot(in);
}

}  // namespace sqrt_trust::nets
