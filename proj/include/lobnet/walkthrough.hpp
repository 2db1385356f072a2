#pragma once

// Live accuracy monitoring and retraining schedules.

#include "lobnet/models.hpp"

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace lobnet::walkthrough {

inline constexpr std::size_t kRollingGranularity = 20;
inline constexpr std::size_t kRollingSpan = 100;

struct Outcome {
    int prediction = 0;
    int truth = 0;
    bool correct = false;
};

/// Outcomes since the last retrain. Every `granularity` outcomes a rolling
/// point is appended: the accuracy over the newest `span` outcomes (or all
/// of them while fewer exist). Only points computed over a full span feed
/// the extrema, so a fresh model is not judged on a handful of ticks.
class AccuracyWindow {
public:
    explicit AccuracyWindow(std::size_t granularity = kRollingGranularity, std::size_t span = kRollingSpan);

    void record(int prediction, int truth);
    /// Appends a rolling point directly; it always counts toward the extrema.
    void push_rolling(double accuracy);
    void reset();

    std::size_t granularity() const noexcept { return granularity_; }
    std::size_t span() const noexcept { return span_; }
    std::size_t count() const noexcept { return count_; }
    const std::deque<Outcome>& outcomes() const noexcept { return outcomes_; }
    const std::vector<double>& rolling() const noexcept { return rolling_; }
    /// Accuracy over the retained outcomes; 0 when empty.
    double current() const noexcept;

    std::size_t extrema_points() const noexcept { return extrema_points_; }
    /// Throw InsufficientHistory when no point has reached the extrema yet.
    double max_acc() const;
    double min_acc() const;

private:
    void add_point(double accuracy, bool counts);

    std::size_t granularity_;
    std::size_t span_;
    std::deque<Outcome> outcomes_;
    std::size_t correct_in_span_ = 0;
    std::size_t count_ = 0;
    std::vector<double> rolling_;
    std::size_t extrema_points_ = 0;
    double max_ = 0.0;
    double min_ = 0.0;
};

/// (max - min) / min. A zero minimum gives 0 when max is also 0, else +inf.
double modified_mdd(double max_acc, double min_acc);
/// Throws InsufficientHistory with fewer than 2 extrema points.
double modified_mdd(const AccuracyWindow& window);

enum class PolicyKind { Static, StableEveryN, MddDynamic };

std::string_view to_string(PolicyKind kind) noexcept;
PolicyKind policy_from_string(std::string_view name);

struct RetrainPolicy {
    PolicyKind kind = PolicyKind::Static;
    std::size_t n = 196;
    double mdd_threshold = 0.15;
    /// Recent samples retained for retraining; 0 means 4 * n.
    std::size_t buffer_cap = 0;

    std::size_t recent_capacity() const noexcept { return buffer_cap == 0 ? 4 * n : buffer_cap; }
};

/// Throws ConfigError.
void validate(const RetrainPolicy& policy);

bool retrain_due(const RetrainPolicy& policy, const AccuracyWindow& window, std::size_t predictions_since_retrain);

/// Training set for one retrain, oldest first.
///   Stable:  the newest recent_capacity() buffered samples, preceded by a
///            seeded draw (without replacement) from the original training
///            data sized replay_fraction of that buffer.
///   Dynamic: the full history (original training data plus everything
///            observed), as kept by the caller.
///   Static:  the buffer as is.
/// Throws PreconditionViolation on an empty buffer.
std::vector<features::Sample> retrain_set(const RetrainPolicy& policy, std::span<const features::Sample> recent,
                                          std::span<const features::Sample> history,
                                          std::span<const features::Sample> original, double replay_fraction,
                                          std::uint64_t seed);

struct RetrainResult {
    /// Null when training diverged; the caller keeps its bundle.
    std::shared_ptr<const models::ModelBundle> bundle;
    bool diverged = false;
    std::size_t samples = 0;
    std::string error;
};

/// Trains a copy of `current` on `data`. The old bundle is never touched.
RetrainResult execute_retrain(const models::ModelBundle& current, const std::vector<features::Sample>& data,
                              const models::TrainConfig& config);

struct RetrainEvent {
    std::int64_t ts_ns = 0;
    PolicyKind policy = PolicyKind::Static;
    std::string trigger;  // "predictions" or "mdd"
    double trigger_value = 0.0;
    std::size_t samples = 0;
    std::size_t at_prediction = 0;
    std::string bundle_hash;
    bool diverged = false;
};

/// event=retrain ts=... policy=... trigger=... value=... samples=... bundle=... status=...
std::string format_event(const RetrainEvent& event);

enum class Mode { Inline, Background };

struct RunnerConfig {
    std::size_t granularity = kRollingGranularity;
    std::size_t span = kRollingSpan;
    models::TrainConfig train{};
    double replay_fraction = 0.25;
    /// Samples kept for dynamic retraining, newest last.
    std::size_t history_cap = 5000;
    Mode mode = Mode::Inline;
    std::uint64_t seed = 1;
    std::function<void(const RetrainEvent&)> on_event;
};

struct StepResult {
    models::Prediction prediction;
    std::optional<bool> correct;  // empty when the sample has no target
    bool retrain_triggered = false;  // false when coalesced
};

/// Prediction loop with a retrain schedule. observe() is called from one
/// thread. In Background mode retraining happens on a worker thread; a
/// trigger that fires while it is busy is coalesced, and a finished bundle
/// is published with a single pointer swap.
class Runner {
public:
    Runner(models::ModelBundle initial, std::vector<features::Sample> original, RetrainPolicy policy,
           RunnerConfig config);
    ~Runner();
    Runner(const Runner&) = delete;
    Runner& operator=(const Runner&) = delete;

    StepResult observe(const features::Sample& sample);

    std::shared_ptr<const models::ModelBundle> active() const;
    /// Blocks until no retrain is running, then applies any finished one.
    void wait_idle();

    const AccuracyWindow& window() const noexcept { return window_; }
    const RetrainPolicy& policy() const noexcept { return policy_; }
    std::size_t predictions() const noexcept { return predictions_; }
    std::size_t predictions_since_retrain() const noexcept { return since_retrain_; }
    const std::vector<RetrainEvent>& events() const noexcept { return events_; }
    std::size_t retrains() const noexcept;
    std::size_t failed_retrains() const noexcept;
    std::size_t coalesced() const noexcept { return coalesced_; }

private:
    struct Job {
        std::vector<features::Sample> data;
        RetrainEvent event;
    };

    bool trigger(const features::Sample& sample, const std::string& reason, double value);
    void finish(RetrainResult result, RetrainEvent event);
    void apply_finished();
    void worker_loop(std::stop_token stop);

    RetrainPolicy policy_;
    RunnerConfig config_;
    std::vector<features::Sample> original_;
    std::deque<features::Sample> recent_;
    std::deque<features::Sample> history_;
    AccuracyWindow window_;
    std::size_t predictions_ = 0;
    std::size_t since_retrain_ = 0;
    std::size_t coalesced_ = 0;
    std::uint64_t retrain_seq_ = 0;
    std::vector<RetrainEvent> events_;

    mutable std::mutex mutex_;
    std::condition_variable_any cv_;
    std::shared_ptr<const models::ModelBundle> active_;
    std::optional<Job> job_;
    bool busy_ = false;
    std::optional<RetrainEvent> finished_;
    std::jthread worker_;
};

/// Mann-Kendall trend statistic with the tie-corrected variance and the
/// continuity-corrected z score.
struct TrendTest {
    double s = 0.0;
    double variance = 0.0;
    double z = 0.0;
};

TrendTest mann_kendall(std::span<const double> series);

}  // namespace lobnet::walkthrough
