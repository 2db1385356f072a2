#include "lobnet/nn/optim.hpp"

#include <cmath>
#include <string>

namespace lobnet::nn {

std::string_view to_string(OptimizerKind kind) noexcept {
    return kind == OptimizerKind::RMSprop ? "rmsprop" : "adam";
}

OptimizerKind optimizer_from_string(std::string_view name) {
    if (name == "rmsprop") return OptimizerKind::RMSprop;
    if (name == "adam") return OptimizerKind::Adam;
    throw Error(Errc::ConfigError, "unknown optimizer " + std::string(name));
}

Optimizer::Optimizer(OptimizerConfig config) {
    if (!(config.learning_rate > 0.0)) throw Error(Errc::PreconditionViolation, "learning rate must be > 0");
    state_.config = config;
}

void Optimizer::reset() {
    state_.first.clear();
    state_.second.clear();
    state_.steps = 0;
}

void Optimizer::step(std::span<Parameter* const> params) {
    auto& st = state_;
    if (st.second.size() != params.size()) {
        st.first.assign(params.size(), {});
        st.second.assign(params.size(), {});
        for (std::size_t k = 0; k < params.size(); ++k) {
            st.second[k].assign(params[k]->value.size(), 0.0);
            if (st.config.kind == OptimizerKind::Adam) st.first[k].assign(params[k]->value.size(), 0.0);
        }
    }
    ++st.steps;
    const auto& cfg = st.config;
    const double eta = cfg.learning_rate;

    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter& p = *params[k];
        if (p.frozen) continue;
        if (p.grad.size() != p.value.size() || st.second[k].size() != p.value.size()) {
            throw Error(Errc::ShapeMismatch, "optimizer state does not match " + p.name);
        }
        auto theta = p.value.data();
        const auto g = p.grad.data();
        auto& s = st.second[k];
        if (cfg.kind == OptimizerKind::RMSprop) {
            for (std::size_t i = 0; i < theta.size(); ++i) {
                s[i] = cfg.rho * s[i] + (1.0 - cfg.rho) * g[i] * g[i];
                theta[i] -= eta * g[i] / std::sqrt(s[i] + cfg.epsilon);
            }
        } else {
            auto& m = st.first[k];
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.steps));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.steps));
            for (std::size_t i = 0; i < theta.size(); ++i) {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                s[i] = cfg.beta2 * s[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                const double m_hat = m[i] / c1;
                const double v_hat = s[i] / c2;
                theta[i] -= eta * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
            }
        }
    }
}

double gradient_norm(std::span<Parameter* const> params) noexcept {
    double sq = 0.0;
    for (const Parameter* p : params) {
        if (p->frozen) continue;
        for (double g : p->grad.data()) sq += g * g;
    }
    return std::sqrt(sq);
}

bool clip_gradients(std::span<Parameter* const> params, double max_norm) noexcept {
    const double norm = gradient_norm(params);
    if (!(norm > max_norm)) return false;
    const double scale = max_norm / norm;
    for (Parameter* p : params) {
        for (double& g : p->grad.data()) g *= scale;
    }
    return true;
}

}  // namespace lobnet::nn
