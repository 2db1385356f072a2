#include "lobnet/book.hpp"

#include <cmath>

namespace lobnet::book {

int default_price_decimals(std::string_view product) noexcept {
    const auto dash = product.rfind('-');
    const std::string_view quote = dash == std::string_view::npos ? product : product.substr(dash + 1);
    return quote == "BTC" ? 5 : 2;
}

OrderBook::OrderBook(std::string product, int price_decimals)
    : product_(std::move(product)), decimals_(price_decimals) {}

double OrderBook::price_of(std::int64_t units) const noexcept {
    // Divide by the exact power of ten: one rounding instead of two.
    return static_cast<double>(units) / std::pow(10.0, decimals_);
}

void OrderBook::apply_snapshot(const feed::SnapshotBody& snapshot, std::int64_t sequence) {
    decltype(bids_) bids;
    decltype(asks_) asks;
    ++stamp_;
    for (const auto& l : snapshot.bids) {
        const double size = l.size.to_double();
        if (size > 0.0) bids[units_of(l.price)] = Level{size, stamp_};
    }
    for (const auto& l : snapshot.asks) {
        const double size = l.size.to_double();
        if (size > 0.0) asks[units_of(l.price)] = Level{size, stamp_};
    }
    if (!bids.empty() && !asks.empty() && bids.begin()->first >= asks.begin()->first) {
        throw Error(Errc::CrossedSnapshot, product_ + ": best bid >= best ask in snapshot");
    }
    bids_ = std::move(bids);
    asks_ = std::move(asks);
    initialized_ = true;
    last_sequence_ = sequence;
}

UpdateOutcome OrderBook::apply_update(const feed::L2UpdateBody& update, std::int64_t sequence) {
    if (!initialized_) throw Error(Errc::Uninitialized, product_ + ": update before snapshot");
    for (const auto& c : update.changes) {
        ++stamp_;
        const std::int64_t key = units_of(c.price);
        const double size = c.new_size.to_double();
        if (c.side == feed::Side::Buy) {
            if (size > 0.0) {
                bids_[key] = Level{size, stamp_};
            } else {
                bids_.erase(key);
            }
        } else {
            if (size > 0.0) {
                asks_[key] = Level{size, stamp_};
            } else {
                asks_.erase(key);
            }
        }
    }
    last_sequence_ = sequence;
    UpdateOutcome out;
    if (crossed()) {
        out.degraded = true;
        out.repaired_levels = repair_crossed();
    }
    return out;
}

void OrderBook::reset() {
    bids_.clear();
    asks_.clear();
    initialized_ = false;
    last_sequence_ = 0;
}

bool OrderBook::crossed() const noexcept {
    return !bids_.empty() && !asks_.empty() && bids_.begin()->first >= asks_.begin()->first;
}

int OrderBook::repair_crossed() {
    int removed = 0;
    while (crossed()) {
        auto bid = bids_.begin();
        auto ask = asks_.begin();
        // Ties (both set by the same change batch stamp) drop the ask.
        if (bid->second.stamp < ask->second.stamp) {
            bids_.erase(bid);
        } else {
            asks_.erase(ask);
        }
        ++removed;
    }
    return removed;
}

BookSummary OrderBook::summarize(int depth_levels) const {
    if (bids_.empty() || asks_.empty()) throw Error(Errc::EmptySide, product_ + ": book side empty");
    if (depth_levels < 1) throw Error(Errc::PreconditionViolation, "depth levels must be >= 1");
    BookSummary s;
    s.depth_levels = depth_levels;
    s.best_bid = price_of(bids_.begin()->first);
    s.best_ask = price_of(asks_.begin()->first);
    s.mid = (s.best_bid + s.best_ask) / 2.0;
    s.spread = s.best_ask - s.best_bid;
    s.best_bid_size = bids_.begin()->second.size;
    s.best_ask_size = asks_.begin()->second.size;

    auto side = [&](const auto& levels, double best, double& depth, double& slope) {
        int i = 0;
        double last_price = best;
        for (const auto& [key, level] : levels) {
            if (i++ == depth_levels) break;
            depth += level.size;
            last_price = price_of(key);
        }
        slope = depth / (std::abs(last_price - best) + kSlopeEpsilon);
    };
    side(bids_, s.best_bid, s.depth_bid, s.slope_bid);
    side(asks_, s.best_ask, s.depth_ask, s.slope_ask);
    const double total = s.depth_bid + s.depth_ask;
    s.imbalance = total > 0.0 ? (s.depth_bid - s.depth_ask) / total : 0.0;
    return s;
}

feed::SnapshotBody OrderBook::top_n_view(int n) const {
    feed::SnapshotBody out;
    out.depth_limit = n;
    int i = 0;
    for (const auto& [key, level] : bids_) {
        if (i++ == n) break;
        out.bids.push_back({Decimal::from_scaled(key, decimals_), Decimal::from_double(level.size)});
    }
    i = 0;
    for (const auto& [key, level] : asks_) {
        if (i++ == n) break;
        out.asks.push_back({Decimal::from_scaled(key, decimals_), Decimal::from_double(level.size)});
    }
    return out;
}

void OrderBook::for_each_bid(const std::function<void(std::int64_t, double)>& fn) const {
    for (const auto& [key, level] : bids_) fn(key, level.size);
}

void OrderBook::for_each_ask(const std::function<void(std::int64_t, double)>& fn) const {
    for (const auto& [key, level] : asks_) fn(key, level.size);
}

}  // namespace lobnet::book
