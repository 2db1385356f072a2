#pragma once

// Seeded data generators with known structure, used by tests and the
// experiment harness in place of archived live feeds.

#include "lobnet/features.hpp"
#include "lobnet/feed.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lobnet::synthetic {

enum class Pattern {
    /// Up iff x[feature_a] > 0, flipped with probability `noise`.
    Planted,
    /// Planted rule until `flip_at`, inverted afterwards.
    RegimeFlip,
    /// Up iff cos(theta) x[a] + sin(theta) x[b] > 0 with theta = drift_rate * i.
    RotatingDrift,
    /// Labels independent of the features.
    Memoryless,
};

struct StreamConfig {
    Pattern pattern = Pattern::Planted;
    std::size_t samples = 1000;
    std::size_t steps = 1;
    std::size_t dim = features::kFeatureDim;
    double noise = 0.05;
    std::size_t feature_a = 0;
    std::size_t feature_b = 1;
    std::size_t flip_at = 0;
    double drift_rate = 0.0;  // radians per sample
    double theta0 = 0.0;
    /// Added to every feature; lets two products differ in location only.
    double mean_shift = 0.0;
    /// AR(1) coefficient of each feature across ticks.
    double persistence = 0.0;
    std::string product = "SYN-A";
    std::int64_t start_ns = 1'530'000'000'000'000'000;
    std::int64_t tick_ns = 1'000'000'000;
    std::uint64_t seed = 1;
};

/// One labelled sample per tick once `steps` ticks exist; the label of a
/// sample is decided by its newest row. r = 0.002 * (1.5 * score + eps)
/// drives the four-class label with the same sign as the binary label.
std::vector<features::Sample> generate(const StreamConfig& config);

/// Ground-truth decision rule at sample index i (before noise).
bool rule_up(const StreamConfig& config, std::size_t i, std::span<const double> x);

struct MarketConfig {
    std::vector<std::string> products{"BTC-USD"};
    std::size_t events = 1000;        // per product, after the snapshot
    int levels = 50;
    double ticker_probability = 0.3;  // share of events that are tickers
    double heartbeat_probability = 0.02;
    std::int64_t start_ns = 1'530'000'000'000'000'000;
    std::int64_t spacing_ns = 50'000'000;
    std::uint64_t seed = 1;
};

struct Frame {
    std::int64_t recv_time_ns = 0;
    std::string raw;
};

/// Consistent snapshot / l2update / ticker / heartbeat frames per product,
/// interleaved in time order, with contiguous per-product sequences.
std::vector<Frame> simulate_market(const MarketConfig& config);

}  // namespace lobnet::synthetic
