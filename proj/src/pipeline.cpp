#include "lobnet/pipeline.hpp"

#include "lobnet/nn/checkpoint.hpp"

#include <algorithm>
#include <tuple>

namespace lobnet::pipeline {

FeedPipeline::FeedPipeline(storage::Recorder* recorder, features::TickAssembler::Options options)
    : recorder_(recorder), assembler_(std::move(options)) {}

std::optional<features::FeatureVector> FeedPipeline::on_frame(const feed::SourceFrame& frame) {
    ++counters_.frames;
    if (frame.resync) {
        ++counters_.resyncs;
        for (const auto& p : products_) {
            gate_.invalidate(p);
            assembler_.on_gap(p);
        }
    }
    auto parsed = feed::parse_message(frame.raw, frame.recv_time_ns);
    if (auto* failure = std::get_if<feed::ParseFailure>(&parsed)) {
        ++counters_.quarantined;
        if (recorder_) {
            recorder_->quarantine(frame.raw, frame.recv_time_ns,
                                  std::string(to_string(failure->code)) + ": " + failure->detail);
        }
        return std::nullopt;
    }
    if (std::holds_alternative<feed::Ignored>(parsed)) {
        ++counters_.ignored;
        return std::nullopt;
    }
    auto& msg = std::get<feed::FeedMessage>(parsed);
    if (recorder_) recorder_->write(msg);
    return on_message(msg);
}

std::optional<features::FeatureVector> FeedPipeline::on_message(const feed::FeedMessage& msg) {
    ++counters_.messages;
    products_.insert(msg.product);
    const auto verdict = gate_.admit(msg);
    switch (verdict.action) {
        case feed::SequenceGate::Action::Pass: break;
        case feed::SequenceGate::Action::Gap:
            ++counters_.gaps;
            ++counters_.suppressed;
            gaps_.push_back(*verdict.gap);
            assembler_.on_gap(msg.product);
            return std::nullopt;
        case feed::SequenceGate::Action::Suppressed: ++counters_.suppressed; return std::nullopt;
        case feed::SequenceGate::Action::Stale: ++counters_.stale; return std::nullopt;
    }
    auto v = assembler_.on_message(msg);
    if (v) ++counters_.ticks;
    return v;
}

std::vector<features::FeatureVector> featurize(feed::Source& source, Counters* counters, storage::Recorder* recorder) {
    FeedPipeline p(recorder);
    std::vector<features::FeatureVector> out;
    while (auto frame = source.next()) {
        if (auto v = p.on_frame(*frame)) out.push_back(std::move(*v));
    }
    if (counters) *counters = p.counters();
    return out;
}

std::vector<features::FeatureVector> featurize(const std::vector<feed::FeedMessage>& messages, Counters* counters) {
    FeedPipeline p;
    std::vector<features::FeatureVector> out;
    for (const auto& m : messages) {
        if (auto v = p.on_message(m)) out.push_back(std::move(*v));
    }
    if (counters) *counters = p.counters();
    return out;
}

std::vector<features::Sample> make_samples(const std::vector<features::FeatureVector>& ticks, std::size_t steps,
                                           features::WindowStats* stats) {
    std::map<std::string, std::vector<features::FeatureVector>> by_product;
    for (const auto& v : ticks) by_product[v.product].push_back(v);
    std::vector<features::Sample> out;
    features::WindowStats total;
    for (auto& [product, series] : by_product) {
        features::WindowStats st;
        const auto labels = features::derive_labels(series);
        auto samples = features::windowize(series, labels, steps, &st);
        total.emitted += st.emitted;
        total.dropped_degraded += st.dropped_degraded;
        total.dropped_unlabeled += st.dropped_unlabeled;
        out.insert(out.end(), std::make_move_iterator(samples.begin()), std::make_move_iterator(samples.end()));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.time_ns, a.product, a.t) < std::tie(b.time_ns, b.product, b.t);
    });
    if (stats) *stats = total;
    return out;
}

std::string samples_hash(const std::vector<features::Sample>& samples) {
    nn::Sha256 h;
    h.update_u64(samples.size());
    for (const auto& s : samples) {
        h.update(s.product);
        h.update_u64(static_cast<std::uint64_t>(s.t));
        h.update_u64(static_cast<std::uint64_t>(s.time_ns));
        h.update_u64(static_cast<std::uint64_t>(s.binary));
        h.update_u64(static_cast<std::uint64_t>(s.multi));
        h.update_u64(s.steps);
        h.update_f64(std::span<const double>(&s.r, 1));
        h.update_f64(s.window);
    }
    return nn::to_hex(h.finish());
}

}  // namespace lobnet::pipeline
