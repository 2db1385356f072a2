#include "lobnet/nn/tensor.hpp"

#include <cmath>

namespace lobnet::nn {

void xavier_uniform(Tensor& weight, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (double& w : weight.data()) w = dist(rng);
}

void gemv_add(std::span<const double> w, std::size_t rows, std::size_t cols, std::span<const double> x,
              std::span<double> y) noexcept {
    const double* wp = w.data();
    const double* xp = x.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = wp + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * xp[c];
        y[r] += acc;
    }
}

void gemv_t_add(std::span<const double> w, std::size_t rows, std::size_t cols, std::span<const double> y,
                std::span<double> x) noexcept {
    const double* wp = w.data();
    double* xp = x.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double yr = y[r];
        if (yr == 0.0) continue;
        const double* wr = wp + r * cols;
        for (std::size_t c = 0; c < cols; ++c) xp[c] += wr[c] * yr;
    }
}

void outer_add(std::span<double> w, std::size_t rows, std::size_t cols, std::span<const double> y,
               std::span<const double> x) noexcept {
    double* wp = w.data();
    const double* xp = x.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double yr = y[r];
        if (yr == 0.0) continue;
        double* wr = wp + r * cols;
        for (std::size_t c = 0; c < cols; ++c) wr[c] += yr * xp[c];
    }
}

bool all_finite(std::span<const double> v) noexcept {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace lobnet::nn
