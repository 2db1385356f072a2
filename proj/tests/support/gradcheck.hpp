#pragma once

#include "lobnet/nn/autoencoder.hpp"
#include "lobnet/nn/layers.hpp"
#include "lobnet/nn/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace lobnet::testing {

inline constexpr double kFdStep = 1e-5;
/// Gradients smaller than this are compared on an absolute scale.
inline constexpr double kGradFloor = 1e-6;

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradFloor});
}

/// Worst relative error between `analytic` and central differences of
/// `loss` with respect to every entry of `values`.
inline double fd_check(std::span<double> values, std::span<const double> analytic, const std::function<double()>& loss) {
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double keep = values[i];
        values[i] = keep + kFdStep;
        const double up = loss();
        values[i] = keep - kFdStep;
        const double down = loss();
        values[i] = keep;
        worst = std::max(worst, relative_error(analytic[i], (up - down) / (2 * kFdStep)));
    }
    return worst;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

inline void randomize(nn::Parameter& p, std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& x : p.value.data()) x = u(rng);
}

/// LSTM with d=3, h=4 over 5 steps; loss = sum_t u_t . h_t.
inline double lstm_gradcheck(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t d = 3, h = 4, steps = 5;
    nn::Lstm lstm("g", d, h);
    randomize(lstm.weight, rng, 0.8);
    randomize(lstm.bias, rng, 0.5);
    auto xs = random_vector(steps * d, rng);
    const auto u = random_vector(steps * h, rng);
    std::vector<double> hs(steps * h);
    auto loss = [&] {
        lstm.forward(xs, steps, hs, nullptr);
        double l = 0;
        for (std::size_t i = 0; i < hs.size(); ++i) l += u[i] * hs[i];
        return l;
    };
    nn::Lstm::Cache cache;
    lstm.forward(xs, steps, hs, &cache);
    lstm.weight.zero_grad();
    lstm.bias.zero_grad();
    std::vector<double> dxs(steps * d);
    lstm.backward(cache, u, dxs);
    const std::vector<double> gw(lstm.weight.grad.data().begin(), lstm.weight.grad.data().end());
    const std::vector<double> gb(lstm.bias.grad.data().begin(), lstm.bias.grad.data().end());
    double worst = fd_check(lstm.weight.value.data(), gw, loss);
    worst = std::max(worst, fd_check(lstm.bias.value.data(), gb, loss));
    worst = std::max(worst, fd_check(xs, dxs, loss));
    return worst;
}

/// Dense layer (each activation) with loss = u . y.
inline double dense_gradcheck(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (auto act : {nn::Activation::Identity, nn::Activation::Tanh, nn::Activation::Sigmoid, nn::Activation::Relu}) {
        const std::size_t in = 5, out = 4;
        nn::Dense layer("g", in, out, act);
        randomize(layer.weight, rng, 0.8);
        randomize(layer.bias, rng, 0.5);
        auto x = random_vector(in, rng);
        const auto u = random_vector(out, rng);
        std::vector<double> y(out);
        auto loss = [&] {
            layer.forward(x, y);
            double l = 0;
            for (std::size_t i = 0; i < out; ++i) l += u[i] * y[i];
            return l;
        };
        layer.forward(x, y);
        layer.weight.zero_grad();
        layer.bias.zero_grad();
        std::vector<double> dx(in);
        layer.backward(x, y, u, dx);
        const std::vector<double> gw(layer.weight.grad.data().begin(), layer.weight.grad.data().end());
        const std::vector<double> gb(layer.bias.grad.data().begin(), layer.bias.grad.data().end());
        worst = std::max(worst, fd_check(layer.weight.value.data(), gw, loss));
        worst = std::max(worst, fd_check(layer.bias.value.data(), gb, loss));
        worst = std::max(worst, fd_check(x, dx, loss));
    }
    return worst;
}

/// Weighted softmax cross-entropy w.r.t. the logits, for 2 and 4 classes.
inline double softmax_ce_gradcheck(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (std::size_t k : {2u, 4u}) {
        auto z = random_vector(k, rng, 3.0);
        const std::size_t target = rng() % k;
        const double w = 0.5 + static_cast<double>(rng() % 100) / 50.0;
        std::vector<double> p(k);
        auto loss = [&] {
            nn::softmax(z, p);
            return w * nn::cross_entropy(p, target);
        };
        nn::softmax(z, p);
        std::vector<double> dz(k);
        nn::softmax_cross_entropy_grad(p, target, w, dz);
        worst = std::max(worst, fd_check(z, dz, loss));
    }
    return worst;
}

/// 6-8-3-8-6 autoencoder, reconstruction loss over a 7-row batch.
inline double autoencoder_gradcheck(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    nn::AutoencoderLayout layout;
    layout.widths = {6, 8, 3, 8, 6};
    nn::Autoencoder ae(layout);
    nn::Rng init(seed);
    ae.init(init);
    for (auto* p : ae.parameters()) randomize(*p, rng, 0.7);
    nn::Tensor x = nn::Tensor::matrix(7, 6);
    for (auto& v : x.data()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5, 6};
    auto params = ae.parameters();
    for (auto* p : params) p->zero_grad();
    ae.accumulate_gradients(x, rows);
    std::vector<std::vector<double>> grads;
    for (auto* p : params) grads.emplace_back(p->grad.data().begin(), p->grad.data().end());
    auto loss = [&] {
        // forward only: 0.5/n * sum ||x_hat - x||^2
        double l = 0;
        for (std::size_t r : rows) {
            const auto rec = ae.reconstruct(x.row(r));
            for (std::size_t j = 0; j < rec.size(); ++j) l += 0.5 * (rec[j] - x(r, j)) * (rec[j] - x(r, j));
        }
        return l / static_cast<double>(rows.size());
    };
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) worst = std::max(worst, fd_check(params[k]->value.data(), grads[k], loss));
    return worst;
}

}  // namespace lobnet::testing
