#pragma once

// Declarative run configuration (JSON, versioned schema).

#include "lobnet/models.hpp"
#include "lobnet/source.hpp"
#include "lobnet/walkthrough.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

namespace lobnet::config {

inline constexpr int kSchemaVersion = 1;
/// The only environment override: the feed endpoint.
inline constexpr const char* kEndpointEnv = "LOBNET_FEED_URL";

struct RunConfig {
    int schema_version = kSchemaVersion;

    std::string url = "wss://ws-feed.pro.coinbase.com";
    feed::Subscription subscription;

    std::string storage_root = "capture";
    bool compress = false;

    int feature_schema = features::kSchemaVersion;
    std::size_t steps = 1;
    int depth_levels = 10;

    models::Variant variant = models::Variant::Reducer;
    int head = 2;
    models::Dims dims;
    models::TrainConfig training;

    walkthrough::RetrainPolicy policy{walkthrough::PolicyKind::StableEveryN};
    std::size_t granularity = walkthrough::kRollingGranularity;
    std::size_t span = walkthrough::kRollingSpan;
    double replay_fraction = 0.25;
    std::size_t history_cap = 5000;

    std::uint64_t seed = 1;

    std::size_t repeats = 20;
    std::size_t threads = 1;
    /// Experiments use the small synthetic-experiment classifier unless set.
    bool experiment_uses_model = false;
};

nlohmann::ordered_json to_json(const RunConfig& config);

/// Missing keys keep their defaults. Unknown keys, wrong types and bad
/// enum names throw ConfigError naming the JSON path.
RunConfig from_json(const nlohmann::json& j);

/// Reads and parses a file; ConfigError when unreadable or not JSON.
RunConfig load(const std::filesystem::path& path);

using EnvLookup = std::function<const char*(const char*)>;
/// Applies LOBNET_FEED_URL when set and non-empty.
void apply_environment(RunConfig& config, const EnvLookup& lookup);
void apply_environment(RunConfig& config);

/// Cross-field checks; throws ConfigError.
void validate(const RunConfig& config);

/// Hex SHA-256 of the compact resolved JSON.
std::string hash(const RunConfig& config);

walkthrough::RunnerConfig runner_config(const RunConfig& config);

}  // namespace lobnet::config
