#include "lobnet/models.hpp"
#include "lobnet/synthetic.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

namespace lobnet::models {
namespace {

Dims small_dims() {
    Dims d;
    d.lstm1 = 16;
    d.lstm2 = 8;
    d.dense = 8;
    return d;
}

std::vector<features::Sample> planted(std::size_t n, std::uint64_t seed, std::size_t steps = 1) {
    synthetic::StreamConfig c;
    c.samples = n;
    c.seed = seed;
    c.steps = steps;
    c.noise = 0.05;
    return synthetic::generate(c);
}

TrainConfig quick(std::size_t epochs = 15) {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = 32;
    t.optimizer.learning_rate = 0.005;
    t.ae_epochs = 10;
    return t;
}

std::filesystem::path temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "lobnet_models_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

TEST(Build, DeterministicUnderSeed) {
    EXPECT_EQ(build(Variant::Plain, 2, Dims{}, 7).content_hash(), build(Variant::Plain, 2, Dims{}, 7).content_hash());
    EXPECT_NE(build(Variant::Plain, 2, Dims{}, 7).content_hash(), build(Variant::Plain, 2, Dims{}, 8).content_hash());
}

TEST(Build, ReducerDimensionChain) {
    const auto b = build(Variant::Reducer, 4, Dims{}, 1);
    EXPECT_EQ(b.ae->input_dim(), 14u);
    EXPECT_EQ(b.ae->code_dim(), 8u);
    EXPECT_EQ(b.pca->input_dim(), 8u);
    EXPECT_EQ(b.pca->output_dim(), 6u);
    EXPECT_EQ(b.lstm1.input_size(), 6u);
    const auto p = b.predict(std::vector<double>(14, 0.3), 1);
    EXPECT_EQ(p.probs.size(), 4u);
}

TEST(Build, BadHeadAndLayout) {
    for (int head : {0, 1, 3, 5}) {
        try {
            build(Variant::Plain, head, Dims{}, 1);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::BadLayout);
        }
    }
    Dims d;
    d.pca = 9;
    EXPECT_THROW(build(Variant::Reducer, 2, d, 1), Error);
}

TEST(Predict, ZeroInputNearUniform) {
    for (int head : {2, 4}) {
        for (auto v : {Variant::Plain, Variant::Denoiser, Variant::Reducer}) {
            const auto b = build(v, head, Dims{}, 3);
            const auto p = b.predict(std::vector<double>(14 * 3, 0.0), 3);
            for (double q : p.probs) EXPECT_NEAR(q, 1.0 / head, 0.1);
        }
    }
}

TEST(Predict, ProbabilitiesSumToOneAndArePure) {
    const auto samples = planted(50, 4, 5);
    for (int head : {2, 4}) {
        const auto b = build(Variant::Reducer, head, Dims{}, 5);
        for (const auto& s : samples) {
            const auto p = b.predict(s);
            EXPECT_NEAR(std::accumulate(p.probs.begin(), p.probs.end(), 0.0), 1.0, 1e-12);
            for (double q : p.probs) {
                EXPECT_GT(q, 0.0);
                EXPECT_LT(q, 1.0);
            }
            EXPECT_EQ(b.predict(s).probs, p.probs);
        }
    }
}

TEST(Predict, ShapeMismatch) {
    const auto b = build(Variant::Plain, 2, Dims{}, 5);
    try {
        b.predict(std::vector<double>(13, 0.0), 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ShapeMismatch);
    }
}

TEST(Predict, DenoiserIsStagewiseComposition) {
    auto b = build(Variant::Denoiser, 2, small_dims(), 9);
    train(b, planted(300, 9), quick(2));
    const auto samples = planted(20, 10, 3);
    for (const auto& s : samples) {
        std::vector<double> feats;
        for (std::size_t t = 0; t < s.steps; ++t) {
            std::vector<double> z(14);
            b.norm.apply_fixed(s.row(t), z);
            const auto rec = b.ae->decode(b.ae->encode(z));
            const auto proj = b.pca->transform(rec);
            feats.insert(feats.end(), proj.begin(), proj.end());
        }
        EXPECT_EQ(b.predict(s).probs, b.classify(feats, s.steps).probs);
    }
}

TEST(Predict, ReducerCheaperThanDenoiser) {
    const auto r = build(Variant::Reducer, 2, Dims{}, 1);
    const auto d = build(Variant::Denoiser, 2, Dims{}, 1);
    for (std::size_t steps : {1u, 10u, 40u}) EXPECT_LT(r.forward_flops(steps).total(), d.forward_flops(steps).total());
}

TEST(Train, ZeroEpochsLeavesBundle) {
    auto b = build(Variant::Reducer, 2, Dims{}, 2);
    const auto before = b.content_hash();
    const auto report = train(b, planted(100, 2), quick(0));
    EXPECT_TRUE(report.epochs.empty());
    EXPECT_EQ(b.content_hash(), before);
}

TEST(Train, PlantedPatternLearned) {
    auto b = build(Variant::Plain, 2, small_dims(), 11);
    const auto report = train(b, planted(2000, 11), quick(15));
    EXPECT_GE(accuracy(b, planted(1000, 12)), 0.90);

    // loss decreases over the first five epochs, one stall allowed
    int stalls = 0;
    for (std::size_t e = 1; e < 5 && e < report.epochs.size(); ++e) {
        if (report.epochs[e].train_loss >= report.epochs[e - 1].train_loss) ++stalls;
    }
    EXPECT_LE(stalls, 1);
}

TEST(Train, PlantedPatternFourClass) {
    auto b = build(Variant::Plain, 4, small_dims(), 13);
    const auto report = train(b, planted(2000, 13), quick(15));
    EXPECT_EQ(report.class_weights.size(), 4u);
    EXPECT_GT(accuracy(b, planted(1000, 14)), 0.5);
}

TEST(Train, SeedFixedIdenticalCurves) {
    auto run = [] {
        auto b = build(Variant::Denoiser, 2, small_dims(), 21);
        const auto r = train(b, planted(400, 21), quick(4));
        return std::make_pair(r.train_loss_curve(), b.content_hash());
    };
    EXPECT_EQ(run(), run());
}

TEST(Train, ExcludedSamplesSkippedForBinaryHead) {
    auto samples = planted(200, 3);
    for (std::size_t i = 0; i < samples.size(); i += 4) samples[i].binary = features::BinaryLabel::Excluded;
    auto b = build(Variant::Plain, 2, small_dims(), 3);
    const auto r = train(b, samples, quick(1));
    EXPECT_EQ(r.excluded_samples, 50u);
    EXPECT_EQ(r.train_samples + r.val_samples, 150u);
}

TEST(Train, InverseFrequencyClassWeights) {
    auto samples = planted(400, 6);
    auto b = build(Variant::Plain, 2, small_dims(), 6);
    TrainConfig cfg = quick(1);
    cfg.validation_fraction = 0.0;
    const auto r = train(b, samples, cfg);
    std::size_t up = 0;
    for (const auto& s : samples) up += s.binary == features::BinaryLabel::Up;
    EXPECT_NEAR(r.class_weights[0], 400.0 / (2.0 * up), 1e-12);
    EXPECT_NEAR(r.class_weights[1], 400.0 / (2.0 * (400 - up)), 1e-12);
}

TEST(Train, DivergenceDetected) {
    auto b = build(Variant::Plain, 2, small_dims(), 3);
    TrainConfig cfg = quick(3);
    cfg.optimizer.learning_rate = 1e308;
    cfg.clip_norm = 1e308;
    try {
        train(b, planted(200, 3), cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DivergenceDetected);
    }
}

TEST(SaveLoad, RoundTripBitIdentical) {
    auto b = build(Variant::Reducer, 4, small_dims(), 31);
    train(b, planted(300, 31, 3), quick(2));
    const auto path = temp_path("reducer.ckpt");
    save(b, path);
    const auto c = load(path, Variant::Reducer);
    EXPECT_EQ(c.content_hash(), b.content_hash());
    EXPECT_EQ(c.metadata.steps, 3u);
    for (const auto& s : planted(50, 32, 3)) EXPECT_EQ(c.predict(s).probs, b.predict(s).probs);
}

TEST(SaveLoad, TruncatedFileIsCorrupt) {
    const auto b = build(Variant::Plain, 2, small_dims(), 1);
    const auto path = temp_path("plain.ckpt");
    save(b, path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 17);
    try {
        load(path);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::CorruptCheckpoint);
    }
}

TEST(SaveLoad, VariantGuard) {
    const auto path = temp_path("denoiser.ckpt");
    save(build(Variant::Denoiser, 2, Dims{}, 1), path);
    try {
        load(path, Variant::Reducer);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::VariantMismatch);
    }
}

}  // namespace
}  // namespace lobnet::models
