#include "lobnet/nn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace lobnet::nn {

std::string_view to_string(Activation a) noexcept {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Relu: return "relu";
    }
    return "?";
}

Activation activation_from_string(std::string_view name) {
    if (name == "identity" || name == "linear") return Activation::Identity;
    if (name == "tanh") return Activation::Tanh;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "relu") return Activation::Relu;
    throw Error(Errc::BadLayout, "unknown activation " + std::string(name));
}

double activate(Activation a, double x) noexcept {
    switch (a) {
        case Activation::Identity: return x;
        case Activation::Tanh: return std::tanh(x);
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::Relu: return x > 0.0 ? x : 0.0;
    }
    return x;
}

double activation_grad_from_output(Activation a, double y) noexcept {
    switch (a) {
        case Activation::Identity: return 1.0;
        case Activation::Tanh: return 1.0 - y * y;
        case Activation::Sigmoid: return y * (1.0 - y);
        case Activation::Relu: return y > 0.0 ? 1.0 : 0.0;
    }
    return 1.0;
}

Dense::Dense(std::string name, std::size_t in, std::size_t out, Activation act)
    : weight(name + ".weight", {out, in}), bias(name + ".bias", {out}), in_(in), out_(out), act_(act) {}

void Dense::init(Rng& rng) {
    xavier_uniform(weight.value, in_, out_, rng);
    bias.value.fill(0.0);
}

void Dense::forward(std::span<const double> x, std::span<double> y) const {
    if (x.size() != in_ || y.size() != out_) throw Error(Errc::ShapeMismatch, "dense forward: " + weight.name);
    std::copy(bias.value.data().begin(), bias.value.data().end(), y.begin());
    gemv_add(weight.value.data(), out_, in_, x, y);
    if (act_ != Activation::Identity) {
        for (double& v : y) v = activate(act_, v);
    }
}

void Dense::backward(std::span<const double> x, std::span<const double> y, std::span<const double> dy,
                     std::span<double> dx) {
    if (x.size() != in_ || y.size() != out_ || dy.size() != out_ || (!dx.empty() && dx.size() != in_)) {
        throw Error(Errc::ShapeMismatch, "dense backward: " + weight.name);
    }
    double pre_buf[256];
    std::vector<double> heap;
    double* pre = pre_buf;
    if (out_ > 256) {
        heap.resize(out_);
        pre = heap.data();
    }
    for (std::size_t i = 0; i < out_; ++i) pre[i] = dy[i] * activation_grad_from_output(act_, y[i]);
    std::span<const double> dpre(pre, out_);
    if (!weight.frozen) outer_add(weight.grad.data(), out_, in_, dpre, x);
    if (!bias.frozen) {
        auto g = bias.grad.data();
        for (std::size_t i = 0; i < out_; ++i) g[i] += pre[i];
    }
    if (!dx.empty()) {
        std::fill(dx.begin(), dx.end(), 0.0);
        gemv_t_add(weight.value.data(), out_, in_, dpre, dx);
    }
}

void softmax(std::span<const double> logits, std::span<double> probs) noexcept {
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - m);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
}

double cross_entropy(std::span<const double> probs, std::size_t target) noexcept {
    return -std::log(std::max(probs[target], 1e-300));
}

void softmax_cross_entropy_grad(std::span<const double> probs, std::size_t target, double weight,
                                std::span<double> dlogits) noexcept {
    for (std::size_t i = 0; i < probs.size(); ++i) {
        dlogits[i] = weight * (probs[i] - (i == target ? 1.0 : 0.0));
    }
}

}  // namespace lobnet::nn
