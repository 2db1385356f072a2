#pragma once

// Frame -> parse -> capture -> sequence gate -> book -> feature vector.

#include "lobnet/features.hpp"
#include "lobnet/feed.hpp"
#include "lobnet/source.hpp"
#include "lobnet/storage.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace lobnet::pipeline {

struct Counters {
    std::uint64_t frames = 0;
    std::uint64_t messages = 0;
    std::uint64_t ignored = 0;
    std::uint64_t quarantined = 0;
    std::uint64_t gaps = 0;
    std::uint64_t suppressed = 0;
    std::uint64_t stale = 0;
    std::uint64_t resyncs = 0;
    std::uint64_t ticks = 0;
};

/// Every parsed message is captured (when a recorder is attached) before
/// the gate sees it; frames that fail to parse go to quarantine.
class FeedPipeline {
public:
    explicit FeedPipeline(storage::Recorder* recorder = nullptr, features::TickAssembler::Options options = {});

    std::optional<features::FeatureVector> on_frame(const feed::SourceFrame& frame);
    std::optional<features::FeatureVector> on_message(const feed::FeedMessage& msg);

    const Counters& counters() const noexcept { return counters_; }
    const features::TickAssembler& assembler() const noexcept { return assembler_; }
    std::vector<feed::GapSignal> gaps() const { return gaps_; }

private:
    storage::Recorder* recorder_;
    feed::SequenceGate gate_;
    features::TickAssembler assembler_;
    std::set<std::string> products_;
    std::vector<feed::GapSignal> gaps_;
    Counters counters_;
};

/// Drains a source through a fresh pipeline.
std::vector<features::FeatureVector> featurize(feed::Source& source, Counters* counters = nullptr,
                                               storage::Recorder* recorder = nullptr);
std::vector<features::FeatureVector> featurize(const std::vector<feed::FeedMessage>& messages,
                                               Counters* counters = nullptr);

/// Per product: labels from consecutive ticks, then windows of `steps`.
/// Samples of all products are merged by (time_ns, product, t).
std::vector<features::Sample> make_samples(const std::vector<features::FeatureVector>& ticks, std::size_t steps,
                                           features::WindowStats* stats = nullptr);

/// Hex SHA-256 over a sample stream (product, t, time, labels, features).
std::string samples_hash(const std::vector<features::Sample>& samples);

}  // namespace lobnet::pipeline
