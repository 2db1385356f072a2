#pragma once

#include "lobnet/features.hpp"
#include "lobnet/nn/autoencoder.hpp"
#include "lobnet/nn/layers.hpp"
#include "lobnet/nn/lstm.hpp"
#include "lobnet/nn/optim.hpp"
#include "lobnet/nn/pca.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lobnet::models {

/// Plain:    norm -> LSTM -> LSTM -> dense -> softmax
/// Denoiser: norm -> encode -> decode -> PCA -> LSTM ...
/// Reducer:  norm -> encode -> PCA -> LSTM ...
enum class Variant { Plain, Denoiser, Reducer };

std::string_view to_string(Variant v) noexcept;
Variant variant_from_string(std::string_view name);

struct Dims {
    std::size_t input = features::kFeatureDim;
    std::size_t lstm1 = 64;
    std::size_t lstm2 = 32;
    std::size_t dense = 16;
    std::vector<std::size_t> ae{14, 32, 8, 32, 14};
    std::size_t pca = 6;

    friend bool operator==(const Dims&, const Dims&) = default;
};

struct BundleMetadata {
    std::uint64_t seed = 0;
    std::int64_t train_start_ns = 0;
    std::int64_t train_end_ns = 0;
    std::size_t train_samples = 0;
    std::size_t epochs_run = 0;
    std::size_t steps = 1;  // window length the bundle was trained on
};

struct Prediction {
    std::vector<double> probs;
    int label = 0;  // argmax, ties to the lower index
};

struct ModelBundle {
    Variant variant = Variant::Plain;
    int head = 2;
    Dims dims;
    features::NormalizationStats norm;
    std::optional<nn::Autoencoder> ae;
    std::optional<nn::PcaModel> pca;
    nn::Lstm lstm1;
    nn::Lstm lstm2;
    nn::Dense dense;
    nn::Dense out;
    BundleMetadata metadata;

    /// Width of the vectors the first LSTM consumes.
    std::size_t classifier_input() const noexcept;

    /// Stage-by-stage feature transform of one raw row (dims.input wide).
    void preprocess_row(std::span<const double> raw, std::span<double> out) const;
    /// Preprocesses every row of a steps x input window.
    std::vector<double> preprocess(std::span<const double> window, std::size_t steps) const;
    /// LSTM/dense/softmax part on already preprocessed rows.
    Prediction classify(std::span<const double> feats, std::size_t steps) const;

    Prediction predict(std::span<const double> window, std::size_t steps) const;
    Prediction predict(const features::Sample& sample) const;

    std::vector<nn::Parameter*> classifier_parameters();
    std::vector<const nn::Parameter*> classifier_parameters() const;

    /// Hex SHA-256 over variant, head, dims and every learned array.
    std::string content_hash() const;

    struct Flops {
        std::size_t encode = 0;
        std::size_t decode = 0;
        std::size_t pca = 0;
        std::size_t lstm = 0;
        std::size_t head = 0;
        std::size_t total() const noexcept { return encode + decode + pca + lstm + head; }
    };
    Flops forward_flops(std::size_t steps) const noexcept;
};

/// Untrained bundle; deterministic under `seed`. Throws BadLayout.
ModelBundle build(Variant variant, int head, const Dims& dims, std::uint64_t seed);

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 128;
    std::size_t patience = 5;
    /// Trailing share of the training samples held out when no explicit
    /// validation set is passed.
    double validation_fraction = 0.1;
    nn::OptimizerConfig optimizer{};
    double clip_norm = 5.0;
    bool class_weights = true;
    std::size_t ae_epochs = 30;
    std::uint64_t seed = 1;
};

struct EpochStats {
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;  // 1-based; 0 when nothing ran
    bool stopped_early = false;
    std::size_t clip_events = 0;
    std::vector<double> class_weights;
    std::vector<double> ae_loss_curve;
    std::size_t train_samples = 0;
    std::size_t val_samples = 0;
    std::size_t excluded_samples = 0;  // no target for this head

    std::vector<double> train_loss_curve() const;
};

/// Trains in place, starting from the bundle's current weights. The
/// normalizer, autoencoder and PCA are refit on the training split. On
/// success the bundle holds the best-validation weights.
/// Throws DivergenceDetected (bundle state is then unspecified; callers
/// that need a fallback train a copy).
TrainReport train(ModelBundle& bundle, const std::vector<features::Sample>& samples, const TrainConfig& config,
                  const std::vector<features::Sample>* validation = nullptr);

/// Fraction of samples with a target for this head that predict() gets right.
double accuracy(const ModelBundle& bundle, const std::vector<features::Sample>& samples);

void save(const ModelBundle& bundle, const std::filesystem::path& path);
/// Throws CorruptCheckpoint, or VariantMismatch when `expected` differs.
ModelBundle load(const std::filesystem::path& path, std::optional<Variant> expected = std::nullopt);

}  // namespace lobnet::models
