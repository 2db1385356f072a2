#pragma once

// Experiment protocols: split sweep, time-step sweep, OLS, classification
// report, downtick ratios and walkthrough comparisons.

#include "lobnet/features.hpp"
#include "lobnet/models.hpp"
#include "lobnet/walkthrough.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lobnet::eval {

inline constexpr std::array<double, 5> kSplitFractions{0.10, 0.20, 0.50, 0.70, 0.85};
inline constexpr std::array<std::size_t, 7> kTimeSteps{1, 3, 5, 7, 10, 20, 40};
inline constexpr double kTimestepFraction = 0.70;
inline constexpr std::size_t kDowntickGroup = 20;
inline constexpr std::size_t kDefaultRepeats = 20;

/// Pairs left out of the "Selected" aggregates.
const std::vector<std::string>& default_excluded();

// ---------------------------------------------------------------- splits

struct Split {
    std::vector<features::Sample> train;
    std::vector<features::Sample> test;
};

/// Orders by (time_ns, product, t) and puts the first round(fraction * n)
/// samples in train. The cut moves forward past samples sharing the last
/// training timestamp, so train and test never overlap in time.
Split leading_split(std::vector<features::Sample> samples, double fraction);

/// max train time < min test time (vacuously true when either side is empty).
bool leakage_free(const Split& split) noexcept;

/// Windows of `steps` rows built from one product's single-row samples;
/// sample i keeps its label and gets rows i-steps+1 .. i. Windows never
/// span a gap in t.
std::vector<features::Sample> rewindow(const std::vector<features::Sample>& single_row, std::size_t steps);

/// Samples of `product` windowed to `steps` rows.
using SampleProvider = std::function<std::vector<features::Sample>(const std::string& product, std::size_t steps)>;

/// Provider over featurized ticks (all products in one vector).
SampleProvider tick_provider(std::vector<features::FeatureVector> ticks);

// ------------------------------------------------------------ experiments

/// Classifier used by the synthetic experiments: LSTM 16/8, dense 8.
models::Dims experiment_dims();
/// 10 epochs, batch 32, lr 0.005, patience 3, 10 autoencoder epochs.
models::TrainConfig experiment_training(std::uint64_t seed = 1);

struct ExperimentConfig {
    models::Variant variant = models::Variant::Plain;
    int head = 2;
    models::Dims dims = experiment_dims();
    models::TrainConfig train = experiment_training();
    std::size_t steps = 1;
    std::uint64_t seed = 1;
    /// A cell with fewer samples on either side of the split is skipped.
    std::size_t min_train = 20;
    std::size_t min_test = 20;
    std::vector<std::string> excluded = default_excluded();
    /// Worker threads for independent cells; results do not depend on it.
    std::size_t threads = 1;
};

/// Builds, trains on `train` and returns accuracy on `test`.
double fit_and_score(const std::vector<features::Sample>& train, const std::vector<features::Sample>& test,
                     const ExperimentConfig& config);

struct SkippedProduct {
    std::string product;
    std::string reason;
};

struct SplitSweepResult {
    std::vector<double> fractions;
    std::vector<std::string> products;  // evaluated, input order
    std::map<std::string, std::vector<double>> accuracy;
    std::vector<double> avg;
    std::vector<double> selected;  // NaN when no product is selected
    std::vector<double> universal;
    std::vector<double> universal_selected;
    std::vector<SkippedProduct> skipped;
    bool leakage_free = true;
};

/// Per product and fraction: train on the leading share, score on the rest.
/// Universal models train on the union of the per-product training splits
/// and score on the union of their test splits. A product too small for any
/// fraction is skipped and listed; InsufficientData when none remain.
SplitSweepResult run_split_sweep(const std::vector<std::string>& products, const SampleProvider& provider,
                                 const ExperimentConfig& config,
                                 std::span<const double> fractions = kSplitFractions);

struct TimestepSweepResult {
    std::vector<std::size_t> steps;
    std::vector<double> universal;
    std::vector<double> universal_selected;
    std::vector<SkippedProduct> skipped;
};

/// Universal and Universal-Selected accuracy at each window length.
TimestepSweepResult run_timestep_sweep(const std::vector<std::string>& products, const SampleProvider& provider,
                                       const ExperimentConfig& config,
                                       std::span<const std::size_t> steps = kTimeSteps,
                                       double fraction = kTimestepFraction);

// ------------------------------------------------------------ statistics

struct OlsFit {
    double intercept = 0.0;
    double slope = 0.0;
    std::vector<double> residuals;
};

/// y = intercept + slope * x by least squares. DegenerateX with fewer than
/// two distinct x; PreconditionViolation on a length mismatch.
OlsFit ols_fit(std::span<const double> x, std::span<const double> y);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

struct ClassRow {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;  // the per-class "accuracy" column
    double f1 = 0.0;
    std::size_t support = 0;
};

struct ClassReport {
    std::vector<ClassRow> classes;
    ClassRow average;  // support-weighted, "avg / total"
    std::vector<std::vector<std::size_t>> confusion;  // [truth][prediction]
    double accuracy = 0.0;
};

/// Per-class metrics over aligned class indices in [0, names.size()).
/// A class never predicted has precision 0; F1 is 0 when P + R = 0.
/// The result is recomputed by brute force and SelfCheckFailed is thrown
/// on disagreement. EmptyInput on no samples.
ClassReport classification_report(std::span<const int> predictions, std::span<const int> truths,
                                  const std::vector<std::string>& names);

/// Fixed-width text table: label, precision, accuracy, f1-score, support.
std::string format_report(const ClassReport& report, const std::string& title);

struct RatioSeries {
    std::vector<double> ratios;
    std::size_t dropped = 0;  // labels in the trailing partial block
};

/// Share of Down labels in each full block of `group`.
/// PreconditionViolation on an Excluded label or group 0.
RatioSeries downtick_ratio_series(std::span<const features::BinaryLabel> labels, std::size_t group = kDowntickGroup);

// ------------------------------------------------------------ walkthrough

struct WalkthroughSetup {
    std::vector<features::Sample> initial;  // trains the starting bundle
    std::vector<features::Sample> stream;
    std::optional<std::size_t> flip_at;     // stream index of a regime change
};

using SetupFactory = std::function<WalkthroughSetup(std::uint64_t seed)>;

/// Label rule rotating by pi/4000 per sample: 1000 initial, 4000 streamed.
WalkthroughSetup drift_setup(std::uint64_t seed);
/// Rule inverted halfway through 4000 samples: 1000 initial, flip at stream index 1000.
WalkthroughSetup regime_flip_setup(std::uint64_t seed);

struct CurvePoint {
    std::size_t prediction = 0;  // outcomes seen so far
    double accuracy = 0.0;
};

struct PolicyRun {
    walkthrough::PolicyKind policy = walkthrough::PolicyKind::Static;
    std::vector<CurvePoint> curve;  // sliding accuracy, never reset
    std::vector<walkthrough::RetrainEvent> events;
    /// Per stream sample: 1 correct, 0 wrong, -1 no target.
    std::vector<std::int8_t> outcomes;
    /// Class indices of every outcome, in order.
    std::vector<int> predicted;
    std::vector<int> truth;
    /// Stream index at which each retrain was triggered.
    std::vector<std::size_t> triggered_at;
    std::size_t retrains = 0;
    std::size_t failed_retrains = 0;
    double final_accuracy = 0.0;
};

struct WalkthroughConfig {
    std::vector<walkthrough::PolicyKind> policies{walkthrough::PolicyKind::Static,
                                                  walkthrough::PolicyKind::StableEveryN,
                                                  walkthrough::PolicyKind::MddDynamic};
    std::size_t repeats = kDefaultRepeats;
    std::uint64_t seed = 1;  // repeat r uses seed + r
    models::Variant variant = models::Variant::Plain;
    int head = 2;
    models::Dims dims = experiment_dims();
    models::TrainConfig train = experiment_training();
    walkthrough::RetrainPolicy policy{};  // kind is taken from `policies`
    walkthrough::RunnerConfig runner{};
    /// Outcomes averaged for the final accuracy.
    std::size_t final_window = 200;
    SetupFactory setup = drift_setup;
    std::size_t threads = 1;
};

/// One policy over one stream, starting from `initial_bundle`.
PolicyRun run_policy(const models::ModelBundle& initial_bundle, const WalkthroughSetup& setup,
                     walkthrough::PolicyKind kind, const WalkthroughConfig& config, std::uint64_t seed);

struct Repeat {
    std::uint64_t seed = 0;
    std::vector<PolicyRun> runs;  // same order as config.policies
    const PolicyRun* find(walkthrough::PolicyKind kind) const;
};

struct ComparisonResult {
    std::vector<walkthrough::PolicyKind> policies;
    std::vector<Repeat> repeats;

    /// Repeats with final accuracy Static < MddDynamic <= StableEveryN.
    std::size_t ordered_repeats() const;
    /// Repeats where `a` finishes below `b`.
    std::size_t below(walkthrough::PolicyKind a, walkthrough::PolicyKind b) const;
    /// Repeats where MddDynamic retrains fewer times than StableEveryN.
    std::size_t fewer_mdd_retrains() const;
};

ComparisonResult run_walkthrough_comparison(const WalkthroughConfig& config);

/// repeat,seed,policy,prediction,accuracy
void write_curves_csv(std::ostream& out, const ComparisonResult& result);
/// repeat,seed,policy,prediction,trigger,value,samples,status
void write_markers_csv(std::ostream& out, const ComparisonResult& result);

struct RecoveryConfig {
    WalkthroughConfig walkthrough{};  // policies are ignored
    double ratio = 0.85;
    std::size_t horizon = 500;
    RecoveryConfig();
};

struct RecoveryRepeat {
    std::uint64_t seed = 0;
    double pre_flip_accuracy = 0.0;
    walkthrough::TrendTest static_trend;
    std::optional<std::size_t> first_retrain;   // stream index, first at or after the flip
    std::optional<std::size_t> recovered_after; // predictions after first_retrain
    PolicyRun static_run;
    PolicyRun stable_run;

    bool static_non_increasing() const noexcept { return static_trend.s <= 0.0; }
    bool recovered(std::size_t horizon) const noexcept { return recovered_after && *recovered_after <= horizon; }
};

struct RecoveryResult {
    std::vector<RecoveryRepeat> repeats;
    std::size_t horizon = 0;
    std::size_t passes() const;
};

/// Static and StableEveryN over a stream with a regime change. Pre-flip
/// accuracy is the Stable run's sliding accuracy over the `span` outcomes
/// before the flip; recovery is the first point, counted from the first
/// post-flip retrain, where that sliding accuracy reaches ratio * pre-flip.
/// The Static trend is Mann-Kendall over its curve points after the flip.
RecoveryResult run_decay_recovery(const RecoveryConfig& config);

// ------------------------------------------------------------------ output

/// product,<fractions...>; product rows then AVG and Selected.
void write_table3(std::ostream& out, const SplitSweepResult& result);
/// fraction,avg,selected,universal,universal_selected
void write_table4(std::ostream& out, const SplitSweepResult& result);
/// steps,universal,universal_selected
void write_table5(std::ostream& out, const TimestepSweepResult& result);
/// Parses write_table5 output. Throws ConfigError.
TimestepSweepResult read_table5(std::istream& in);
/// term,universal,universal_selected with rows Const and X.
void write_table6(std::ostream& out, const OlsFit& universal, const OlsFit& selected);
/// prediction,accuracy
void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

}  // namespace lobnet::eval
