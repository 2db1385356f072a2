#pragma once

#include "lobnet/nn/tensor.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lobnet::nn {

enum class Activation { Identity, Tanh, Sigmoid, Relu };

std::string_view to_string(Activation a) noexcept;
Activation activation_from_string(std::string_view name);

double activate(Activation a, double x) noexcept;
/// Derivative expressed through the activation's output y = f(x).
double activation_grad_from_output(Activation a, double y) noexcept;

/// Fully connected layer y = f(W x + b), W is out x in.
class Dense {
public:
    Dense() = default;
    Dense(std::string name, std::size_t in, std::size_t out, Activation act);

    void init(Rng& rng);

    std::size_t in() const noexcept { return in_; }
    std::size_t out() const noexcept { return out_; }
    Activation activation() const noexcept { return act_; }

    void forward(std::span<const double> x, std::span<double> y) const;
    /// Accumulates dW, db from (x, y = forward(x), dy); writes dx when non-empty.
    void backward(std::span<const double> x, std::span<const double> y, std::span<const double> dy,
                  std::span<double> dx);

    std::vector<Parameter*> parameters() { return {&weight, &bias}; }
    std::vector<const Parameter*> parameters() const { return {&weight, &bias}; }

    /// Multiply-accumulate count of one forward pass.
    std::size_t forward_flops() const noexcept { return in_ * out_; }

    Parameter weight;
    Parameter bias;

private:
    std::size_t in_ = 0;
    std::size_t out_ = 0;
    Activation act_ = Activation::Identity;
};

/// Numerically stable softmax (max-shifted).
void softmax(std::span<const double> logits, std::span<double> probs) noexcept;

/// -log p[target], with p clamped away from 0.
double cross_entropy(std::span<const double> probs, std::size_t target) noexcept;

/// Gradient of weight * cross_entropy(softmax(logits), target) w.r.t. the
/// logits: weight * (probs - onehot(target)).
void softmax_cross_entropy_grad(std::span<const double> probs, std::size_t target, double weight,
                                std::span<double> dlogits) noexcept;

}  // namespace lobnet::nn
