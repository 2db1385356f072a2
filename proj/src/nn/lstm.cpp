#include "lobnet/nn/lstm.hpp"

#include <algorithm>
#include <cmath>

namespace lobnet::nn {

namespace {

inline double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Lstm::Lstm(std::string name, std::size_t input, std::size_t hidden)
    : weight(name + ".weight", {4 * hidden, hidden + input}),
      bias(name + ".bias", {4 * hidden}),
      input_(input),
      hidden_(hidden) {
    if (input == 0 || hidden == 0) throw Error(Errc::BadLayout, "lstm sizes must be positive");
}

void Lstm::init(Rng& rng, double forget_bias) {
    const std::size_t cols = hidden_ + input_;
    for (std::size_t g = 0; g < 4; ++g) {
        Tensor block = Tensor::matrix(hidden_, cols);
        xavier_uniform(block, cols, hidden_, rng);
        std::copy(block.data().begin(), block.data().end(), weight.value.data().begin() + g * hidden_ * cols);
    }
    bias.value.fill(0.0);
    auto fb = gate_bias(kForget);
    std::fill(fb.begin(), fb.end(), forget_bias);
}

std::span<double> Lstm::gate_weight(Gate gate) noexcept {
    const std::size_t cols = hidden_ + input_;
    return weight.value.data().subspan(gate * hidden_ * cols, hidden_ * cols);
}

std::span<double> Lstm::gate_bias(Gate gate) noexcept { return bias.value.data().subspan(gate * hidden_, hidden_); }

LstmState Lstm::step(std::span<const double> x, const LstmState& prev) const {
    if (x.size() != input_ || prev.c.size() != hidden_ || prev.h.size() != hidden_) {
        throw Error(Errc::ShapeMismatch, "lstm step: " + weight.name);
    }
    const std::size_t h = hidden_;
    std::vector<double> z(h + input_);
    std::copy(prev.h.begin(), prev.h.end(), z.begin());
    std::copy(x.begin(), x.end(), z.begin() + static_cast<std::ptrdiff_t>(h));
    std::vector<double> a(bias.value.data().begin(), bias.value.data().end());
    gemv_add(weight.value.data(), 4 * h, h + input_, z, a);
    LstmState next = LstmState::zeros(h);
    for (std::size_t j = 0; j < h; ++j) {
        const double f = sigmoid(a[kForget * h + j]);
        const double i = sigmoid(a[kInput * h + j]);
        const double g = std::tanh(a[kCandidate * h + j]);
        const double o = sigmoid(a[kOutput * h + j]);
        next.c[j] = f * prev.c[j] + i * g;
        next.h[j] = o * std::tanh(next.c[j]);
    }
    return next;
}

void Lstm::forward(std::span<const double> xs, std::size_t steps, std::span<double> hs, Cache* cache) const {
    const std::size_t h = hidden_;
    const std::size_t zc = h + input_;
    if (xs.size() != steps * input_ || hs.size() != steps * h) throw Error(Errc::ShapeMismatch, "lstm forward: " + weight.name);

    Cache local;
    Cache& k = cache != nullptr ? *cache : local;
    k.steps = steps;
    k.z.assign(steps * zc, 0.0);
    k.gates.assign(steps * 4 * h, 0.0);
    k.c.assign((steps + 1) * h, 0.0);
    k.tanh_c.assign(steps * h, 0.0);

    const auto w = weight.value.data();
    const auto b = bias.value.data();
    for (std::size_t t = 0; t < steps; ++t) {
        double* z = k.z.data() + t * zc;
        if (t > 0) std::copy_n(hs.data() + (t - 1) * h, h, z);
        std::copy_n(xs.data() + t * input_, input_, z + h);

        double* a = k.gates.data() + t * 4 * h;
        std::copy(b.begin(), b.end(), a);
        gemv_add(w, 4 * h, zc, std::span<const double>(z, zc), std::span<double>(a, 4 * h));

        const double* c_prev = k.c.data() + t * h;
        double* c = k.c.data() + (t + 1) * h;
        double* tc = k.tanh_c.data() + t * h;
        double* out = hs.data() + t * h;
        for (std::size_t j = 0; j < h; ++j) {
            const double f = sigmoid(a[kForget * h + j]);
            const double i = sigmoid(a[kInput * h + j]);
            const double g = std::tanh(a[kCandidate * h + j]);
            const double o = sigmoid(a[kOutput * h + j]);
            a[kForget * h + j] = f;
            a[kInput * h + j] = i;
            a[kCandidate * h + j] = g;
            a[kOutput * h + j] = o;
            c[j] = f * c_prev[j] + i * g;
            tc[j] = std::tanh(c[j]);
            out[j] = o * tc[j];
        }
    }
}

void Lstm::backward(const Cache& cache, std::span<const double> dhs, std::span<double> dxs) {
    const std::size_t h = hidden_;
    const std::size_t zc = h + input_;
    const std::size_t steps = cache.steps;
    if (dhs.size() != steps * h || (!dxs.empty() && dxs.size() != steps * input_)) {
        throw Error(Errc::ShapeMismatch, "lstm backward: " + weight.name);
    }

    std::vector<double> dh_next(h, 0.0);
    std::vector<double> dc_next(h, 0.0);
    std::vector<double> da(4 * h);
    std::vector<double> dz(zc);
    const auto w = weight.value.data();
    auto gw = weight.grad.data();
    auto gb = bias.grad.data();

    for (std::size_t t = steps; t-- > 0;) {
        const double* a = cache.gates.data() + t * 4 * h;
        const double* c_prev = cache.c.data() + t * h;
        const double* tc = cache.tanh_c.data() + t * h;
        for (std::size_t j = 0; j < h; ++j) {
            const double f = a[kForget * h + j];
            const double i = a[kInput * h + j];
            const double g = a[kCandidate * h + j];
            const double o = a[kOutput * h + j];
            const double dh = dhs[t * h + j] + dh_next[j];
            const double d_o = dh * tc[j];
            const double dc = dh * o * (1.0 - tc[j] * tc[j]) + dc_next[j];
            da[kForget * h + j] = dc * c_prev[j] * f * (1.0 - f);
            da[kInput * h + j] = dc * g * i * (1.0 - i);
            da[kCandidate * h + j] = dc * i * (1.0 - g * g);
            da[kOutput * h + j] = d_o * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        const std::span<const double> z(cache.z.data() + t * zc, zc);
        if (!weight.frozen) outer_add(gw, 4 * h, zc, da, z);
        if (!bias.frozen) {
            for (std::size_t r = 0; r < 4 * h; ++r) gb[r] += da[r];
        }
        std::fill(dz.begin(), dz.end(), 0.0);
        gemv_t_add(w, 4 * h, zc, da, dz);
        std::copy_n(dz.begin(), h, dh_next.begin());
        if (!dxs.empty()) std::copy_n(dz.begin() + static_cast<std::ptrdiff_t>(h), input_, dxs.begin() + static_cast<std::ptrdiff_t>(t * input_));
    }
}

}  // namespace lobnet::nn
