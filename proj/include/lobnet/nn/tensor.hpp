#pragma once

#include "lobnet/error.hpp"

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace lobnet::nn {

/// Row-major array of doubles with an explicit shape.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(element_count(shape_), fill) {}
    Tensor(std::vector<std::size_t> shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != element_count(shape_)) throw Error(Errc::ShapeMismatch, "tensor data does not match shape");
    }

    static Tensor vector(std::size_t n, double fill = 0.0) { return Tensor({n}, fill); }
    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) { return Tensor({rows, cols}, fill); }

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const noexcept { return shape_.size() < 2 ? 1 : data_.size() / std::max<std::size_t>(shape_[0], 1); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }
    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

    std::span<double> row(std::size_t r) noexcept { return std::span<double>(data_).subspan(r * cols(), cols()); }
    std::span<const double> row(std::size_t r) const noexcept {
        return std::span<const double>(data_).subspan(r * cols(), cols());
    }

    void fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

    friend bool operator==(const Tensor&, const Tensor&) = default;

    static std::size_t element_count(const std::vector<std::size_t>& shape) noexcept {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

/// Trainable array plus its gradient accumulator.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool frozen = false;

    Parameter() = default;
    Parameter(std::string n, std::vector<std::size_t> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}

    void zero_grad() noexcept { grad.fill(0.0); }
};

using Rng = std::mt19937_64;

/// U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
void xavier_uniform(Tensor& weight, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Dense kernels over row-major spans.

/// y += W x, W is rows x cols.
void gemv_add(std::span<const double> w, std::size_t rows, std::size_t cols, std::span<const double> x,
              std::span<double> y) noexcept;
/// x += W^T y.
void gemv_t_add(std::span<const double> w, std::size_t rows, std::size_t cols, std::span<const double> y,
                std::span<double> x) noexcept;
/// W += y x^T.
void outer_add(std::span<double> w, std::size_t rows, std::size_t cols, std::span<const double> y,
               std::span<const double> x) noexcept;

bool all_finite(std::span<const double> v) noexcept;

}  // namespace lobnet::nn
