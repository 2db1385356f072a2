#pragma once

#include "lobnet/book.hpp"
#include "lobnet/feed.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace lobnet::testing {

/// Random snapshot plus a stream of absolute-size updates that never cross
/// the book (bids stay below `mid`, asks above).
struct BookScenario {
    feed::SnapshotBody snapshot;
    std::vector<feed::L2UpdateBody> updates;
};

inline BookScenario random_book_scenario(std::uint64_t seed, int levels, std::size_t updates, int decimals = 2) {
    std::mt19937_64 rng(seed);
    const std::int64_t mid = 500'000 + static_cast<std::int64_t>(rng() % 100'000);
    const std::int64_t span = 4 * levels;
    std::uniform_int_distribution<std::int64_t> offset(1, span);
    std::uniform_int_distribution<std::int64_t> size(0, 40'000);
    auto price = [&](std::int64_t units) { return Decimal::from_scaled(units, decimals); };
    auto qty = [&](std::int64_t units) { return Decimal::from_scaled(units, 4); };

    BookScenario sc;
    std::vector<std::int64_t> bid_px, ask_px;
    while (static_cast<int>(bid_px.size()) < levels) {
        const auto p = mid - offset(rng);
        if (std::find(bid_px.begin(), bid_px.end(), p) == bid_px.end()) bid_px.push_back(p);
    }
    while (static_cast<int>(ask_px.size()) < levels) {
        const auto p = mid + offset(rng);
        if (std::find(ask_px.begin(), ask_px.end(), p) == ask_px.end()) ask_px.push_back(p);
    }
    std::sort(bid_px.rbegin(), bid_px.rend());
    std::sort(ask_px.begin(), ask_px.end());
    for (auto p : bid_px) sc.snapshot.bids.push_back({price(p), qty(1 + size(rng))});
    for (auto p : ask_px) sc.snapshot.asks.push_back({price(p), qty(1 + size(rng))});

    for (std::size_t u = 0; u < updates; ++u) {
        feed::L2UpdateBody body;
        const int n = 1 + static_cast<int>(rng() % 3);
        for (int k = 0; k < n; ++k) {
            const bool bid = rng() % 2 == 0;
            const std::int64_t p = bid ? mid - offset(rng) : mid + offset(rng);
            // roughly a third of changes remove levels
            const std::int64_t s = rng() % 3 == 0 ? 0 : size(rng);
            body.changes.push_back({bid ? feed::Side::Buy : feed::Side::Sell, price(p), qty(s)});
        }
        sc.updates.push_back(std::move(body));
    }
    return sc;
}

/// Deliberately simple reference book: unsorted (price text, size) lists,
/// linear search, sorted only when read back.
class NaiveBook {
public:
    void snapshot(const feed::SnapshotBody& s) {
        bids_.clear();
        asks_.clear();
        for (const auto& l : s.bids) set(bids_, l.price.to_double(), l.size.to_double());
        for (const auto& l : s.asks) set(asks_, l.price.to_double(), l.size.to_double());
    }
    void update(const feed::L2UpdateBody& u) {
        for (const auto& c : u.changes) set(c.side == feed::Side::Buy ? bids_ : asks_, c.price.to_double(), c.new_size.to_double());
    }
    std::vector<std::pair<double, double>> bids() const {
        auto v = bids_;
        std::sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.first > b.first; });
        return v;
    }
    std::vector<std::pair<double, double>> asks() const {
        auto v = asks_;
        std::sort(v.begin(), v.end());
        return v;
    }

private:
    static void set(std::vector<std::pair<double, double>>& side, double price, double size) {
        for (std::size_t i = 0; i < side.size(); ++i) {
            if (side[i].first == price) {
                if (size == 0.0) {
                    side.erase(side.begin() + static_cast<std::ptrdiff_t>(i));
                } else {
                    side[i].second = size;
                }
                return;
            }
        }
        if (size != 0.0) side.emplace_back(price, size);
    }
    std::vector<std::pair<double, double>> bids_, asks_;
};

inline std::vector<std::pair<double, double>> book_bids(const book::OrderBook& b) {
    std::vector<std::pair<double, double>> out;
    b.for_each_bid([&](std::int64_t units, double size) { out.emplace_back(b.price_of(units), size); });
    return out;
}

inline std::vector<std::pair<double, double>> book_asks(const book::OrderBook& b) {
    std::vector<std::pair<double, double>> out;
    b.for_each_ask([&](std::int64_t units, double size) { out.emplace_back(b.price_of(units), size); });
    return out;
}

/// Runs one scenario through both books; true when they agree level by level.
inline bool book_matches_oracle(const BookScenario& sc, std::string* why = nullptr) {
    book::OrderBook b("BTC-USD", 2);
    NaiveBook oracle;
    b.apply_snapshot(sc.snapshot, 1);
    oracle.snapshot(sc.snapshot);
    for (const auto& u : sc.updates) {
        b.apply_update(u);
        oracle.update(u);
    }
    if (book_bids(b) != oracle.bids()) {
        if (why) *why = "bid side differs";
        return false;
    }
    if (book_asks(b) != oracle.asks()) {
        if (why) *why = "ask side differs";
        return false;
    }
    return true;
}

}  // namespace lobnet::testing
