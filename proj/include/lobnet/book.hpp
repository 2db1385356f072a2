#pragma once

#include "lobnet/feed.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>

namespace lobnet::book {

/// Number of decimal places of the product's quote increment: 5 for
/// BTC-quoted pairs (0.00001), 2 otherwise (0.01).
int default_price_decimals(std::string_view product) noexcept;

/// Immutable microstructure summary of one book state.
struct BookSummary {
    double best_bid = 0.0;      // p_b
    double best_ask = 0.0;      // p_a
    double mid = 0.0;           // M_p = (p_b + p_a) / 2
    double spread = 0.0;        // p_a - p_b
    double best_bid_size = 0.0;
    double best_ask_size = 0.0;
    double depth_bid = 0.0;     // summed size of the top k bid levels
    double depth_ask = 0.0;
    double slope_bid = 0.0;     // depth / (|price at level k - best| + eps)
    double slope_ask = 0.0;
    double imbalance = 0.0;     // (depth_bid - depth_ask) / (depth_bid + depth_ask)
    int depth_levels = 0;       // k
};

inline constexpr int kDefaultDepthLevels = 10;
inline constexpr double kSlopeEpsilon = 1e-12;

struct UpdateOutcome {
    /// True if the update left the book crossed and levels were removed.
    bool degraded = false;
    int repaired_levels = 0;
};

/// Local level-2 book for one product.
///
/// Prices are keyed by integer multiples of the quote increment, so level
/// identity is exact. Zero-size levels are never stored.
class OrderBook {
public:
    explicit OrderBook(std::string product = {}, int price_decimals = 2);

    const std::string& product() const noexcept { return product_; }
    int price_decimals() const noexcept { return decimals_; }
    bool initialized() const noexcept { return initialized_; }
    std::int64_t last_sequence() const noexcept { return last_sequence_; }

    /// Replaces the book with the snapshot content. Throws CrossedSnapshot
    /// (book left unchanged) if best bid >= best ask.
    void apply_snapshot(const feed::SnapshotBody& snapshot, std::int64_t sequence = 0);

    /// Absolute-size level replacement; size 0 removes the level.
    /// Throws Uninitialized before the first snapshot. A crossed result is
    /// repaired by deleting the crossing levels that were set least recently.
    UpdateOutcome apply_update(const feed::L2UpdateBody& update, std::int64_t sequence = 0);

    /// Drops all state; the next snapshot reinitializes.
    void reset();

    /// Throws EmptySide if either side has no levels.
    BookSummary summarize(int depth_levels = kDefaultDepthLevels) const;

    /// First `n` levels per side in canonical order.
    feed::SnapshotBody top_n_view(int n = feed::kSnapshotDepthLimit) const;

    std::size_t bid_levels() const noexcept { return bids_.size(); }
    std::size_t ask_levels() const noexcept { return asks_.size(); }

    /// Visits (price units, size) best-first.
    void for_each_bid(const std::function<void(std::int64_t, double)>& fn) const;
    void for_each_ask(const std::function<void(std::int64_t, double)>& fn) const;

    double price_of(std::int64_t units) const noexcept;
    std::int64_t units_of(const Decimal& price) const { return price.to_scaled(decimals_); }

private:
    struct Level {
        double size = 0.0;
        std::uint64_t stamp = 0;  // update counter when last set
    };

    bool crossed() const noexcept;
    int repair_crossed();

    std::string product_;
    int decimals_;
    bool initialized_ = false;
    std::int64_t last_sequence_ = 0;
    std::uint64_t stamp_ = 0;
    std::map<std::int64_t, Level, std::greater<>> bids_;
    std::map<std::int64_t, Level> asks_;
};

}  // namespace lobnet::book
