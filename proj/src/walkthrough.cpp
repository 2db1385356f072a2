#include "lobnet/walkthrough.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace lobnet::walkthrough {

using features::Sample;

AccuracyWindow::AccuracyWindow(std::size_t granularity, std::size_t span) : granularity_(granularity), span_(span) {
    if (granularity == 0 || span == 0) throw Error(Errc::PreconditionViolation, "granularity and span must be positive");
}

void AccuracyWindow::record(int prediction, int truth) {
    const bool correct = prediction == truth;
    outcomes_.push_back({prediction, truth, correct});
    correct_in_span_ += correct;
    if (outcomes_.size() > span_) {
        correct_in_span_ -= outcomes_.front().correct;
        outcomes_.pop_front();
    }
    ++count_;
    if (count_ % granularity_ == 0) add_point(current(), count_ >= span_);
}

void AccuracyWindow::push_rolling(double accuracy) {
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw Error(Errc::PreconditionViolation, "accuracy outside [0, 1]");
    add_point(accuracy, true);
}

void AccuracyWindow::add_point(double accuracy, bool counts) {
    rolling_.push_back(accuracy);
    if (!counts) return;
    if (extrema_points_ == 0) {
        max_ = min_ = accuracy;
    } else {
        max_ = std::max(max_, accuracy);
        min_ = std::min(min_, accuracy);
    }
    ++extrema_points_;
}

void AccuracyWindow::reset() {
    outcomes_.clear();
    correct_in_span_ = 0;
    count_ = 0;
    rolling_.clear();
    extrema_points_ = 0;
    max_ = min_ = 0.0;
}

double AccuracyWindow::current() const noexcept {
    return outcomes_.empty() ? 0.0 : static_cast<double>(correct_in_span_) / static_cast<double>(outcomes_.size());
}

double AccuracyWindow::max_acc() const {
    if (extrema_points_ == 0) throw Error(Errc::InsufficientHistory, "no rolling accuracy since last retrain");
    return max_;
}

double AccuracyWindow::min_acc() const {
    if (extrema_points_ == 0) throw Error(Errc::InsufficientHistory, "no rolling accuracy since last retrain");
    return min_;
}

double modified_mdd(double max_acc, double min_acc) {
    if (max_acc < min_acc) throw Error(Errc::PreconditionViolation, "max accuracy below min accuracy");
    if (min_acc <= 0.0) return max_acc > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return (max_acc - min_acc) / min_acc;
}

double modified_mdd(const AccuracyWindow& window) {
    if (window.extrema_points() < 2) throw Error(Errc::InsufficientHistory, "modified mdd needs 2 rolling points");
    return modified_mdd(window.max_acc(), window.min_acc());
}

std::string_view to_string(PolicyKind kind) noexcept {
    switch (kind) {
        case PolicyKind::Static: return "static";
        case PolicyKind::StableEveryN: return "stable";
        case PolicyKind::MddDynamic: return "mdd";
    }
    return "static";
}

PolicyKind policy_from_string(std::string_view name) {
    if (name == "static") return PolicyKind::Static;
    if (name == "stable") return PolicyKind::StableEveryN;
    if (name == "mdd" || name == "dynamic") return PolicyKind::MddDynamic;
    throw Error(Errc::ConfigError, "unknown policy " + std::string(name));
}

void validate(const RetrainPolicy& policy) {
    if (policy.n == 0) throw Error(Errc::ConfigError, "policy n must be >= 1");
    if (!(policy.mdd_threshold > 0.0 && policy.mdd_threshold < 1.0)) {
        throw Error(Errc::ConfigError, "mdd threshold must lie in (0, 1)");
    }
}

bool retrain_due(const RetrainPolicy& policy, const AccuracyWindow& window, std::size_t predictions_since_retrain) {
    switch (policy.kind) {
        case PolicyKind::Static: return false;
        case PolicyKind::StableEveryN: return predictions_since_retrain >= policy.n;
        case PolicyKind::MddDynamic:
            if (window.extrema_points() < 2) return false;
            return modified_mdd(window) > policy.mdd_threshold;
    }
    return false;
}

std::vector<Sample> retrain_set(const RetrainPolicy& policy, std::span<const Sample> recent,
                                std::span<const Sample> history, std::span<const Sample> original,
                                double replay_fraction, std::uint64_t seed) {
    if (recent.empty()) throw Error(Errc::PreconditionViolation, "retrain buffer is empty");
    std::vector<Sample> out;
    switch (policy.kind) {
        case PolicyKind::MddDynamic:
            out.assign(history.begin(), history.end());
            if (out.empty()) out.assign(recent.begin(), recent.end());
            break;
        case PolicyKind::StableEveryN: {
            const std::size_t keep = std::min(recent.size(), policy.recent_capacity());
            const std::size_t replay = std::min(
                original.size(), static_cast<std::size_t>(std::llround(replay_fraction * static_cast<double>(keep))));
            std::vector<std::size_t> idx(original.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::mt19937_64 rng(seed);
            for (std::size_t i = 0; i < replay; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
                std::swap(idx[i], idx[pick(rng)]);
            }
            idx.resize(replay);
            std::sort(idx.begin(), idx.end());
            for (std::size_t i : idx) out.push_back(original[i]);
            out.insert(out.end(), recent.end() - static_cast<std::ptrdiff_t>(keep), recent.end());
            break;
        }
        case PolicyKind::Static: out.assign(recent.begin(), recent.end()); break;
    }
    return out;
}

RetrainResult execute_retrain(const models::ModelBundle& current, const std::vector<Sample>& data,
                              const models::TrainConfig& config) {
    if (data.empty()) throw Error(Errc::PreconditionViolation, "retrain buffer is empty");
    RetrainResult result;
    result.samples = data.size();
    auto next = std::make_shared<models::ModelBundle>(current);
    try {
        models::train(*next, data, config);
    } catch (const Error& e) {
        if (e.code() != Errc::DivergenceDetected) throw;
        result.diverged = true;
        result.error = e.what();
        return result;
    }
    result.bundle = std::move(next);
    return result;
}

std::string format_event(const RetrainEvent& e) {
    std::ostringstream os;
    os << "event=retrain ts=" << e.ts_ns << " policy=" << to_string(e.policy) << " trigger=" << e.trigger
       << " value=" << e.trigger_value << " samples=" << e.samples << " prediction=" << e.at_prediction
       << " bundle=" << (e.bundle_hash.empty() ? "-" : e.bundle_hash) << " status=" << (e.diverged ? "diverged" : "ok");
    return os.str();
}

Runner::Runner(models::ModelBundle initial, std::vector<Sample> original, RetrainPolicy policy, RunnerConfig config)
    : policy_(policy),
      config_(std::move(config)),
      original_(std::move(original)),
      window_(config_.granularity, config_.span),
      active_(std::make_shared<const models::ModelBundle>(std::move(initial))) {
    validate(policy_);
    for (const auto& s : original_) history_.push_back(s);
    while (history_.size() > config_.history_cap) history_.pop_front();
    if (config_.mode == Mode::Background) {
        worker_ = std::jthread([this](std::stop_token st) { worker_loop(st); });
    }
}

Runner::~Runner() {
    if (worker_.joinable()) {
        worker_.request_stop();
        cv_.notify_all();
    }
}

std::shared_ptr<const models::ModelBundle> Runner::active() const {
    std::lock_guard lock(mutex_);
    return active_;
}

std::size_t Runner::retrains() const noexcept {
    return static_cast<std::size_t>(std::count_if(events_.begin(), events_.end(), [](const auto& e) { return !e.diverged; }));
}

std::size_t Runner::failed_retrains() const noexcept { return events_.size() - retrains(); }

StepResult Runner::observe(const Sample& sample) {
    apply_finished();
    StepResult step;
    const auto bundle = active();
    step.prediction = bundle->predict(sample);
    ++predictions_;
    ++since_retrain_;
    const int truth = features::target_index(sample, bundle->head);
    if (truth >= 0) {
        window_.record(step.prediction.label, truth);
        step.correct = step.prediction.label == truth;
    }

    recent_.push_back(sample);
    if (recent_.size() > policy_.recent_capacity()) recent_.pop_front();
    if (policy_.kind == PolicyKind::MddDynamic) {
        history_.push_back(sample);
        if (history_.size() > config_.history_cap) history_.pop_front();
    }

    if (retrain_due(policy_, window_, since_retrain_)) {
        const bool stable = policy_.kind == PolicyKind::StableEveryN;
        step.retrain_triggered = trigger(sample, stable ? "predictions" : "mdd",
                                         stable ? static_cast<double>(since_retrain_) : modified_mdd(window_));
        apply_finished();
    }
    return step;
}

bool Runner::trigger(const Sample& sample, const std::string& reason, double value) {
    {
        std::lock_guard lock(mutex_);
        if (busy_) {
            ++coalesced_;
            return false;
        }
        busy_ = true;
    }
    const std::vector<Sample> recent(recent_.begin(), recent_.end());
    const std::vector<Sample> history(history_.begin(), history_.end());
    Job job;
    job.data = retrain_set(policy_, recent, history, original_, config_.replay_fraction,
                           config_.seed ^ (0x9E3779B97F4A7C15ULL * ++retrain_seq_));
    job.event.ts_ns = sample.time_ns;
    job.event.policy = policy_.kind;
    job.event.trigger = reason;
    job.event.trigger_value = value;
    job.event.samples = job.data.size();
    job.event.at_prediction = predictions_;

    if (config_.mode == Mode::Inline) {
        auto current = active();
        finish(execute_retrain(*current, job.data, config_.train), std::move(job.event));
        return true;
    }
    {
        std::lock_guard lock(mutex_);
        job_ = std::move(job);
    }
    cv_.notify_all();
    return true;
}

void Runner::finish(RetrainResult result, RetrainEvent event) {
    event.diverged = result.diverged;
    std::lock_guard lock(mutex_);
    if (result.bundle) {
        event.bundle_hash = result.bundle->content_hash();
        active_ = std::move(result.bundle);
    }
    finished_ = std::move(event);
    busy_ = false;
    cv_.notify_all();
}

void Runner::apply_finished() {
    std::optional<RetrainEvent> done;
    {
        std::lock_guard lock(mutex_);
        done.swap(finished_);
    }
    if (!done) return;
    window_.reset();
    since_retrain_ = 0;
    if (config_.on_event) config_.on_event(*done);
    events_.push_back(std::move(*done));
}

void Runner::wait_idle() {
    {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return !busy_; });
    }
    apply_finished();
}

void Runner::worker_loop(std::stop_token stop) {
    while (true) {
        Job job;
        {
            std::unique_lock lock(mutex_);
            if (!cv_.wait(lock, stop, [this] { return job_.has_value(); })) return;
            job = std::move(*job_);
            job_.reset();
        }
        const auto current = active();
        RetrainResult result;
        try {
            result = execute_retrain(*current, job.data, config_.train);
        } catch (const std::exception& e) {
            result.diverged = true;
            result.error = e.what();
        }
        finish(std::move(result), std::move(job.event));
    }
}

TrendTest mann_kendall(std::span<const double> x) {
    TrendTest t;
    const std::size_t n = x.size();
    if (n < 2) return t;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) t.s += (x[j] > x[i]) - (x[j] < x[i]);
    }
    std::map<double, std::size_t> ties;
    for (double v : x) ++ties[v];
    const double nd = static_cast<double>(n);
    double var = nd * (nd - 1.0) * (2.0 * nd + 5.0);
    for (const auto& [v, c] : ties) {
        const double cd = static_cast<double>(c);
        var -= cd * (cd - 1.0) * (2.0 * cd + 5.0);
    }
    t.variance = var / 18.0;
    if (t.variance > 0.0) {
        if (t.s > 0.0) t.z = (t.s - 1.0) / std::sqrt(t.variance);
        if (t.s < 0.0) t.z = (t.s + 1.0) / std::sqrt(t.variance);
    }
    return t;
}

}  // namespace lobnet::walkthrough
