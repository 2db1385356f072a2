#pragma once

#include "lobnet/nn/tensor.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace lobnet::nn {

enum class OptimizerKind { RMSprop, Adam };

std::string_view to_string(OptimizerKind kind) noexcept;
OptimizerKind optimizer_from_string(std::string_view name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::RMSprop;
    double learning_rate = 1e-3;  // eta
    double rho = 0.9;             // RMSprop decay
    double epsilon = 1e-8;
    double beta1 = 0.9;           // Adam
    double beta2 = 0.999;
};

/// Per-parameter accumulators, index-aligned with the parameter list the
/// optimizer is stepped with. RMSprop uses `second` only.
struct OptimizerState {
    OptimizerConfig config;
    std::vector<std::vector<double>> first;
    std::vector<std::vector<double>> second;
    std::uint64_t steps = 0;
};

/// RMSprop:  s <- rho s + (1 - rho) g^2;  theta <- theta - eta g / sqrt(s + eps)
/// Adam:     m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2;
///           theta <- theta - eta m_hat / (sqrt(v_hat) + eps), bias-corrected.
/// Frozen parameters are left untouched.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig config = {});

    void step(std::span<Parameter* const> params);

    const OptimizerState& state() const noexcept { return state_; }
    OptimizerState& state() noexcept { return state_; }
    void reset();

    double learning_rate() const noexcept { return state_.config.learning_rate; }
    void set_learning_rate(double lr) noexcept { state_.config.learning_rate = lr; }

private:
    OptimizerState state_;
};

/// Global L2 norm of all gradients.
double gradient_norm(std::span<Parameter* const> params) noexcept;

/// Rescales gradients so their global norm is at most `max_norm`.
/// Returns true when clipping happened.
bool clip_gradients(std::span<Parameter* const> params, double max_norm) noexcept;

}  // namespace lobnet::nn
