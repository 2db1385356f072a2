#pragma once

#include "lobnet/nn/tensor.hpp"

#include <span>
#include <string>
#include <vector>

namespace lobnet::nn {

struct LstmState {
    std::vector<double> c;  // cell state
    std::vector<double> h;  // output

    static LstmState zeros(std::size_t hidden) { return {std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0)}; }
};

/// One LSTM layer.
///
/// The four gates share one stacked weight matrix of shape 4h x (h + d),
/// gate blocks in the order forget, input, candidate, output, and each row
/// acting on the concatenation [h_{t-1}; x_t]:
///
///   f = sigmoid(W_f z + b_f)     i = sigmoid(W_i z + b_i)
///   g = tanh(W_g z + b_g)        o = sigmoid(W_o z + b_o)
///   c_t = f * c_{t-1} + i * g    h_t = o * tanh(c_t)
class Lstm {
public:
    enum Gate : std::size_t { kForget = 0, kInput = 1, kCandidate = 2, kOutput = 3 };

    Lstm() = default;
    Lstm(std::string name, std::size_t input, std::size_t hidden);

    /// Xavier-uniform gate weights, zero biases except the forget gate.
    void init(Rng& rng, double forget_bias = 1.0);

    std::size_t input_size() const noexcept { return input_; }
    std::size_t hidden_size() const noexcept { return hidden_; }

    /// Rows [gate*h, (gate+1)*h) of the stacked weight.
    std::span<double> gate_weight(Gate gate) noexcept;
    std::span<double> gate_bias(Gate gate) noexcept;

    /// Single cell step.
    LstmState step(std::span<const double> x, const LstmState& prev) const;

    struct Cache {
        std::size_t steps = 0;
        std::vector<double> z;      // steps x (h + d)
        std::vector<double> gates;  // steps x 4h, post-activation
        std::vector<double> c;      // (steps + 1) x h, row 0 is the initial state
        std::vector<double> tanh_c; // steps x h
    };

    /// Runs `steps` inputs (row-major steps x d) from a zero state and
    /// writes every h_t into `hs` (steps x h). Fills `cache` when given.
    void forward(std::span<const double> xs, std::size_t steps, std::span<double> hs, Cache* cache) const;

    /// BPTT. `dhs` holds dL/dh_t from above for every step. Accumulates
    /// parameter gradients (unless frozen) and writes dL/dx_t into `dxs`
    /// when it is non-empty.
    void backward(const Cache& cache, std::span<const double> dhs, std::span<double> dxs);

    std::vector<Parameter*> parameters() { return {&weight, &bias}; }
    std::vector<const Parameter*> parameters() const { return {&weight, &bias}; }

    std::size_t forward_flops(std::size_t steps) const noexcept {
        return steps * 4 * hidden_ * (hidden_ + input_);
    }

    Parameter weight;  // 4h x (h + d)
    Parameter bias;    // 4h

private:
    std::size_t input_ = 0;
    std::size_t hidden_ = 0;
};

}  // namespace lobnet::nn
