#include "lobnet/nn/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace lobnet::nn {

Autoencoder::Autoencoder(AutoencoderLayout layout, std::string name) : layout_(std::move(layout)) {
    const auto& w = layout_.widths;
    if (w.size() < 3 || w.size() % 2 == 0) throw Error(Errc::BadLayout, "autoencoder layout needs an odd number (>= 3) of widths");
    if (w.front() != w.back()) throw Error(Errc::BadLayout, "autoencoder input and output widths differ");
    bottleneck_ = w.size() / 2;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] == 0) throw Error(Errc::BadLayout, "autoencoder width must be positive");
        if (w[i] < w[bottleneck_]) throw Error(Errc::BadLayout, "bottleneck must be the narrowest layer");
    }
    if (w[bottleneck_] > w.front()) throw Error(Errc::BadLayout, "bottleneck wider than input");
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        Activation act = layout_.hidden;
        if (i + 1 == bottleneck_) act = layout_.bottleneck;
        if (i + 2 == w.size()) act = Activation::Identity;
        layers_.emplace_back(name + ".l" + std::to_string(i), w[i], w[i + 1], act);
    }
}

void Autoencoder::init(Rng& rng) {
    for (auto& l : layers_) l.init(rng);
}

void Autoencoder::run(std::size_t first, std::size_t last, std::span<const double> in, std::span<double> out) const {
    std::vector<double> a(in.begin(), in.end());
    std::vector<double> b;
    for (std::size_t i = first; i < last; ++i) {
        b.assign(layers_[i].out(), 0.0);
        layers_[i].forward(a, b);
        a.swap(b);
    }
    if (out.size() != a.size()) throw Error(Errc::ShapeMismatch, "autoencoder output size");
    std::copy(a.begin(), a.end(), out.begin());
}

void Autoencoder::encode(std::span<const double> x, std::span<double> code) const { run(0, bottleneck_, x, code); }

void Autoencoder::decode(std::span<const double> code, std::span<double> x_hat) const {
    run(bottleneck_, layers_.size(), code, x_hat);
}

std::vector<double> Autoencoder::encode(std::span<const double> x) const {
    std::vector<double> code(code_dim());
    encode(x, code);
    return code;
}

std::vector<double> Autoencoder::decode(std::span<const double> code) const {
    std::vector<double> out(input_dim());
    decode(code, out);
    return out;
}

std::vector<double> Autoencoder::reconstruct(std::span<const double> x) const { return decode(encode(x)); }

double Autoencoder::mse(const Tensor& x) const {
    if (x.cols() != input_dim()) throw Error(Errc::ShapeMismatch, "autoencoder input width");
    double total = 0.0;
    std::vector<double> out(input_dim());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        run(0, layers_.size(), x.row(r), out);
        const auto row = x.row(r);
        for (std::size_t j = 0; j < out.size(); ++j) total += (out[j] - row[j]) * (out[j] - row[j]);
    }
    return x.rows() == 0 ? 0.0 : total / static_cast<double>(x.rows() * input_dim());
}

double Autoencoder::accumulate_gradients(const Tensor& x, std::span<const std::size_t> rows) {
    const std::size_t n_layers = layers_.size();
    std::vector<std::vector<double>> acts(n_layers + 1);
    std::vector<double> delta;
    std::vector<double> delta_in;
    double loss = 0.0;
    const double scale = 1.0 / static_cast<double>(rows.size());
    for (std::size_t r : rows) {
        const auto input = x.row(r);
        acts[0].assign(input.begin(), input.end());
        for (std::size_t i = 0; i < n_layers; ++i) {
            acts[i + 1].assign(layers_[i].out(), 0.0);
            layers_[i].forward(acts[i], acts[i + 1]);
        }
        const auto& out = acts[n_layers];
        delta.assign(out.size(), 0.0);
        for (std::size_t j = 0; j < out.size(); ++j) {
            const double e = out[j] - input[j];
            loss += 0.5 * e * e * scale;
            delta[j] = e * scale;
        }
        for (std::size_t i = n_layers; i-- > 0;) {
            delta_in.assign(i > 0 ? layers_[i].in() : 0, 0.0);
            layers_[i].backward(acts[i], acts[i + 1], delta, delta_in);
            delta.swap(delta_in);
        }
    }
    return loss;
}

std::vector<Parameter*> Autoencoder::parameters() {
    std::vector<Parameter*> out;
    for (auto& l : layers_) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    return out;
}

std::vector<const Parameter*> Autoencoder::parameters() const {
    std::vector<const Parameter*> out;
    for (const auto& l : layers_) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    return out;
}

std::size_t Autoencoder::encode_flops() const noexcept {
    std::size_t f = 0;
    for (std::size_t i = 0; i < bottleneck_; ++i) f += layers_[i].forward_flops();
    return f;
}

std::size_t Autoencoder::decode_flops() const noexcept {
    std::size_t f = 0;
    for (std::size_t i = bottleneck_; i < layers_.size(); ++i) f += layers_[i].forward_flops();
    return f;
}

AutoencoderTrainResult autoencoder_train(Autoencoder& ae, const Tensor& x, const AutoencoderTrainConfig& config) {
    if (x.rows() == 0) throw Error(Errc::EmptyInput, "autoencoder training set is empty");
    if (x.cols() != ae.input_dim()) throw Error(Errc::ShapeMismatch, "autoencoder input width");

    AutoencoderTrainResult result;
    auto params = ae.parameters();
    Optimizer opt(config.optimizer);
    Rng rng(config.seed);
    std::vector<std::size_t> order(x.rows());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = config.batch_size == 0 ? x.rows() : std::min(config.batch_size, x.rows());

    double current = ae.mse(x);
    if (!std::isfinite(current)) throw Error(Errc::DivergenceDetected, "autoencoder loss is not finite before training");
    result.loss_curve.push_back(current);

    std::vector<Tensor> saved_values;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        saved_values.clear();
        for (auto* p : params) saved_values.push_back(p->value);
        const OptimizerState saved_state = opt.state();

        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t len = std::min(batch, order.size() - start);
            for (auto* p : params) p->zero_grad();
            ae.accumulate_gradients(x, std::span<const std::size_t>(order).subspan(start, len));
            if (clip_gradients(params, config.clip_norm)) ++result.clip_events;
            opt.step(params);
        }
        const double next = ae.mse(x);
        if (!std::isfinite(next)) {
            throw Error(Errc::DivergenceDetected, "autoencoder loss became non-finite at epoch " + std::to_string(epoch));
        }
        if (next > current) {
            for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = saved_values[k];
            const double lr = opt.learning_rate() * 0.5;
            opt.state() = saved_state;
            opt.set_learning_rate(lr);
            ++result.rejected_epochs;
        } else {
            current = next;
        }
        result.loss_curve.push_back(current);
    }
    return result;
}

}  // namespace lobnet::nn
