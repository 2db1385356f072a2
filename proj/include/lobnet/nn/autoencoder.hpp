#pragma once

#include "lobnet/nn/layers.hpp"
#include "lobnet/nn/optim.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace lobnet::nn {

/// Symmetric dense autoencoder, e.g. layout 14-32-8-32-14. The middle entry
/// is the bottleneck; layers feeding hidden widths use `hidden`, the layer
/// into the bottleneck uses `bottleneck`, and the output layer is linear.
struct AutoencoderLayout {
    std::vector<std::size_t> widths{14, 32, 8, 32, 14};
    Activation hidden = Activation::Tanh;
    Activation bottleneck = Activation::Identity;
};

class Autoencoder {
public:
    Autoencoder() = default;
    explicit Autoencoder(AutoencoderLayout layout, std::string name = "ae");

    void init(Rng& rng);

    const AutoencoderLayout& layout() const noexcept { return layout_; }
    std::size_t input_dim() const noexcept { return layout_.widths.front(); }
    std::size_t code_dim() const noexcept { return layout_.widths[bottleneck_]; }

    void encode(std::span<const double> x, std::span<double> code) const;
    void decode(std::span<const double> code, std::span<double> x_hat) const;
    std::vector<double> encode(std::span<const double> x) const;
    std::vector<double> decode(std::span<const double> code) const;
    std::vector<double> reconstruct(std::span<const double> x) const;

    /// Mean over rows of the per-row mean squared reconstruction error.
    double mse(const Tensor& x) const;

    /// Loss 0.5/n * sum ||x_hat - x||^2 over a row block; accumulates grads.
    double accumulate_gradients(const Tensor& x, std::span<const std::size_t> rows);

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

    std::size_t encode_flops() const noexcept;
    std::size_t decode_flops() const noexcept;

    std::vector<Dense>& layers() noexcept { return layers_; }
    const std::vector<Dense>& layers() const noexcept { return layers_; }

private:
    void run(std::size_t first, std::size_t last, std::span<const double> in, std::span<double> out) const;

    AutoencoderLayout layout_;
    std::size_t bottleneck_ = 0;  // index into widths
    std::vector<Dense> layers_;
};

struct AutoencoderTrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 128;
    OptimizerConfig optimizer{};
    double clip_norm = 5.0;
    std::uint64_t seed = 1;
};

struct AutoencoderTrainResult {
    /// Training MSE before training (entry 0) and after every epoch.
    std::vector<double> loss_curve;
    std::size_t rejected_epochs = 0;
    std::size_t clip_events = 0;
};

/// Mini-batch training on the rows of `x`. An epoch that raises the full
/// training MSE is rolled back and the learning rate halved, so the
/// reported curve never increases. Throws DivergenceDetected on NaN loss.
AutoencoderTrainResult autoencoder_train(Autoencoder& ae, const Tensor& x, const AutoencoderTrainConfig& config);

}  // namespace lobnet::nn
