#pragma once

#include "lobnet/book.hpp"
#include "lobnet/feed.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lobnet::features {

/// Fixed component schema of F_t (schema version 1).
enum Component : std::size_t {
    kMid = 0,
    kSpread,
    kBestBid,
    kBestAsk,
    kBestBidSize,
    kBestAskSize,
    kDepthBid,
    kDepthAsk,
    kImbalance,
    kSlopeBid,
    kSlopeAsk,
    kTradePrice,
    kTradeSize,
    kTickDirection,
    kComponentCount
};

inline constexpr std::size_t kFeatureDim = kComponentCount;
inline constexpr int kSchemaVersion = 1;

const std::array<std::string_view, kFeatureDim>& component_names() noexcept;

struct FeatureVector {
    std::vector<double> values;  // kFeatureDim entries
    std::int64_t t = 0;          // tick index within the product stream
    std::int64_t time_ns = 0;    // receive time of the ticker
    std::string product;
    bool degraded = false;

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Builds F_t from the ticker and the book summary at the ticker's arrival.
/// The tick direction is the only component that looks at `prev` (tick
/// rule, zero ticks keep the previous direction); it is 0 without `prev`.
FeatureVector vectorize(const feed::TickerBody& ticker, const book::BookSummary& summary,
                        const FeatureVector* prev);

enum class BinaryLabel { Up, Down, Excluded };
enum class MultiLabel { SigInc, InsigInc, InsigDec, SigDec };

std::string_view to_string(BinaryLabel label) noexcept;
std::string_view to_string(MultiLabel label) noexcept;

/// Up/Down by the sign of the mid-price change; equal mids are Excluded.
BinaryLabel label_binary(double mid_t, double mid_next) noexcept;

inline constexpr double kSignificanceThreshold = 0.002;
/// Relative changes within this distance of a class boundary count as the
/// boundary itself, absorbing binary rounding of decimal prices.
inline constexpr double kBoundaryTolerance = 1e-12;

/// Four-class scheme: (0.002, inf) SigInc, (0, 0.002] InsigInc,
/// [-0.002, 0) InsigDec, (-inf, -0.002) SigDec; r = 0 folds into InsigInc.
MultiLabel classify_relative_change(double r) noexcept;

/// r = (close_next - close_t) / close_t, then classify. close_t must be > 0.
MultiLabel label_multiclass(double close_t, double close_next);

struct TickLabel {
    bool resolved = false;
    BinaryLabel binary = BinaryLabel::Excluded;
    MultiLabel multi = MultiLabel::InsigInc;
    double r = 0.0;
};

/// Labels tick t from tick t+1 (mid for binary, trade price for four-class).
/// The last tick, and ticks whose successor is degraded or belongs to a
/// different run, stay unresolved.
std::vector<TickLabel> derive_labels(const std::vector<FeatureVector>& ticks);

struct Sample {
    std::vector<double> window;  // steps x dim, oldest first
    std::size_t steps = 1;
    std::size_t dim = kFeatureDim;
    std::int64_t t = 0;          // tick index of the newest row
    std::int64_t time_ns = 0;
    std::string product;
    BinaryLabel binary = BinaryLabel::Excluded;
    MultiLabel multi = MultiLabel::InsigInc;
    double r = 0.0;

    std::span<const double> row(std::size_t step) const {
        return std::span<const double>(window).subspan(step * dim, dim);
    }
};

/// Index of the class a sample trains on: head 2 maps Up/Down to 0/1
/// (Excluded gives -1); head 4 maps SigInc..SigDec to 0..3.
int target_index(const Sample& sample, int head) noexcept;

struct WindowStats {
    std::size_t emitted = 0;
    std::size_t dropped_degraded = 0;
    std::size_t dropped_unlabeled = 0;
};

/// Index ranges [t-s+1, t] of every clean window; windows never span a
/// degraded tick or a gap in t.
std::vector<std::size_t> window_ends(const std::vector<FeatureVector>& ticks, std::size_t steps,
                                     WindowStats* stats = nullptr);

/// One Sample per clean window whose newest tick has a resolved label.
std::vector<Sample> windowize(const std::vector<FeatureVector>& ticks, const std::vector<TickLabel>& labels,
                              std::size_t steps, WindowStats* stats = nullptr);

/// Incremental windowizer for one product's live stream.
class StreamingWindowizer {
public:
    explicit StreamingWindowizer(std::size_t steps);
    /// Returns the window ending at `v` once `steps` consecutive clean ticks exist.
    std::optional<Sample> push(const FeatureVector& v);
    std::size_t steps() const noexcept { return steps_; }

private:
    std::size_t steps_;
    std::vector<FeatureVector> ring_;
};

/// Z-score statistics fitted on training data only.
struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<std::size_t> dropped;  // constant components

    std::size_t dim() const noexcept { return mean.size(); }
    std::size_t retained_dim() const noexcept { return mean.size() - dropped.size(); }
    bool is_dropped(std::size_t component) const noexcept;

    /// Retained components only: (x - mean) / stddev.
    std::vector<double> apply(std::span<const double> x) const;
    /// Inverse of apply(); dropped components come back as their mean.
    std::vector<double> invert(std::span<const double> z) const;
    /// Full-width variant: dropped components become 0, so dimensionality
    /// stays fixed across refits.
    void apply_fixed(std::span<const double> x, std::span<double> out) const;

    friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

/// Fits over every row of every window. Components whose population
/// stddev is <= 1e-12 * max(1, |mean|) are dropped.
NormalizationStats fit_normalizer(const std::vector<Sample>& training);
NormalizationStats fit_normalizer_rows(std::span<const double> rows, std::size_t dim);

/// Streams book + ticker messages into feature vectors, one per ticker.
class TickAssembler {
public:
    struct Options {
        int depth_levels = book::kDefaultDepthLevels;
        std::map<std::string, int, std::less<>> price_decimals;  // override default_price_decimals
    };

    struct Counters {
        std::uint64_t ticks = 0;
        std::uint64_t skipped_no_book = 0;
        std::uint64_t degraded_ticks = 0;
        std::uint64_t crossed_snapshots = 0;
        std::uint64_t updates_before_snapshot = 0;
    };

    TickAssembler();
    explicit TickAssembler(Options options);

    /// Applies book messages; returns F_t when `msg` is a Ticker on a usable book.
    std::optional<FeatureVector> on_message(const feed::FeedMessage& msg);
    /// A gap or reconnect invalidates the product's book until the next snapshot.
    void on_gap(const std::string& product);

    const book::OrderBook* book_for(const std::string& product) const;
    const Counters& counters() const noexcept { return counters_; }

private:
    struct ProductState {
        book::OrderBook book;
        std::optional<FeatureVector> prev;
        std::int64_t next_t = 0;
        bool pending_degraded = false;
    };
    ProductState& state_for(const std::string& product);

    Options options_;
    std::map<std::string, ProductState, std::less<>> products_;
    Counters counters_;
};

/// CSV with a header naming every component: product,t,time_ns,degraded,<14 components>.
void write_csv(std::ostream& out, const std::vector<FeatureVector>& ticks);
std::vector<FeatureVector> read_csv(std::istream& in);

/// Flat sample matrix for external oracles: product,t,label columns, then step-major features.
void write_samples_csv(std::ostream& out, const std::vector<Sample>& samples);

}  // namespace lobnet::features
