#include "lobnet/book.hpp"

#include "support/book_oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace lobnet::book {
namespace {

using feed::L2UpdateBody;
using feed::Side;
using feed::SnapshotBody;

Decimal D(const char* s) { return *Decimal::parse(s); }

SnapshotBody snap(std::vector<std::pair<const char*, const char*>> bids, std::vector<std::pair<const char*, const char*>> asks) {
    SnapshotBody s;
    for (auto [p, q] : bids) s.bids.push_back({D(p), D(q)});
    for (auto [p, q] : asks) s.asks.push_back({D(p), D(q)});
    return s;
}

TEST(OrderBook, SnapshotBestPrices) {
    OrderBook b("BTC-USD");
    b.apply_snapshot(snap({{"100", "1"}}, {{"101", "2"}}), 9);
    const auto s = b.summarize();
    EXPECT_DOUBLE_EQ(s.best_bid, 100.0);
    EXPECT_DOUBLE_EQ(s.best_ask, 101.0);
    EXPECT_EQ(b.last_sequence(), 9);
}

TEST(OrderBook, EmptySnapshotHasNoSummary) {
    OrderBook b("BTC-USD");
    b.apply_snapshot(SnapshotBody{});
    EXPECT_TRUE(b.initialized());
    EXPECT_EQ(b.bid_levels(), 0u);
    try {
        b.summarize();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::EmptySide);
    }
}

TEST(OrderBook, CrossedSnapshotRejectedAndBookKept) {
    OrderBook b("BTC-USD");
    b.apply_snapshot(snap({{"100", "1"}}, {{"101", "2"}}));
    try {
        b.apply_snapshot(snap({{"102", "1"}}, {{"101", "2"}}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::CrossedSnapshot);
    }
    EXPECT_DOUBLE_EQ(b.summarize().best_bid, 100.0);
}

TEST(OrderBook, ZeroSizeRemovesLevel) {
    OrderBook b("BTC-USD");
    b.apply_snapshot(snap({{"100", "1"}}, {{"101", "2"}}));
    b.apply_update(L2UpdateBody{{{Side::Buy, D("100"), D("0")}}});
    EXPECT_EQ(b.bid_levels(), 0u);
}

TEST(OrderBook, AbsoluteReplacement) {
    OrderBook b("BTC-USD");
    b.apply_snapshot(snap({{"100", "1"}}, {{"101", "2"}}));
    b.apply_update(L2UpdateBody{{{Side::Sell, D("101"), D("5")}}});
    EXPECT_EQ(testing::book_asks(b), (std::vector<std::pair<double, double>>{{101.0, 5.0}}));
}

TEST(OrderBook, UpdateBeforeSnapshotIsUninitialized) {
    OrderBook b("BTC-USD");
    try {
        b.apply_update(L2UpdateBody{{{Side::Sell, D("101"), D("5")}}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::Uninitialized);
    }
}

TEST(OrderBook, IdempotentRepeatedUpdate) {
    OrderBook b("BTC-USD");
    b.apply_snapshot(snap({{"100", "1"}, {"99", "3"}}, {{"101", "2"}}));
    const L2UpdateBody u{{{Side::Buy, D("99.5"), D("4")}, {Side::Sell, D("101"), D("7")}}};
    b.apply_update(u);
    const auto once = testing::book_bids(b);
    b.apply_update(u);
    EXPECT_EQ(testing::book_bids(b), once);
}

TEST(OrderBook, CrossingUpdateRepairedAndFlagged) {
    OrderBook b("BTC-USD");
    b.apply_snapshot(snap({{"100", "1"}}, {{"101", "2"}, {"102", "2"}}));
    const auto out = b.apply_update(L2UpdateBody{{{Side::Buy, D("101.5"), D("1")}}});
    EXPECT_TRUE(out.degraded);
    EXPECT_GE(out.repaired_levels, 1);
    const auto s = b.summarize();
    EXPECT_LT(s.best_bid, s.best_ask);
    EXPECT_DOUBLE_EQ(s.best_bid, 101.5);  // the stale ask at 101 went
}

TEST(Summarize, MidAndSpread) {
    OrderBook b("BTC-USD");
    b.apply_snapshot(snap({{"100", "1"}}, {{"102", "1"}}));
    const auto s = b.summarize();
    EXPECT_DOUBLE_EQ(s.mid, 101.0);
    EXPECT_DOUBLE_EQ(s.spread, 2.0);
}

TEST(Summarize, SymmetricBookHasZeroImbalance) {
    OrderBook b("BTC-USD");
    b.apply_snapshot(snap({{"100", "1"}, {"99", "2"}, {"98", "3"}}, {{"102", "1"}, {"103", "2"}, {"104", "3"}}));
    EXPECT_DOUBLE_EQ(b.summarize().imbalance, 0.0);
}

TEST(Summarize, FixtureDepthMatchesColumnSums) {
    const auto sc = testing::random_book_scenario(11, 50, 0);
    OrderBook b("BTC-USD");
    b.apply_snapshot(sc.snapshot);
    EXPECT_EQ(b.bid_levels(), 50u);
    EXPECT_EQ(b.ask_levels(), 50u);

    // independent pass over the raw fixture
    for (int k : {1, 5, 10, 50}) {
        double bid_sum = 0, ask_sum = 0;
        for (int i = 0; i < k; ++i) {
            bid_sum += sc.snapshot.bids[static_cast<std::size_t>(i)].size.to_double();
            ask_sum += sc.snapshot.asks[static_cast<std::size_t>(i)].size.to_double();
        }
        const double best_bid = sc.snapshot.bids.front().price.to_double();
        const double best_ask = sc.snapshot.asks.front().price.to_double();
        const double kth_bid = sc.snapshot.bids[static_cast<std::size_t>(k - 1)].price.to_double();
        const double kth_ask = sc.snapshot.asks[static_cast<std::size_t>(k - 1)].price.to_double();
        const auto s = b.summarize(k);
        EXPECT_NEAR(s.depth_bid, bid_sum, 1e-9 * bid_sum);
        EXPECT_NEAR(s.depth_ask, ask_sum, 1e-9 * ask_sum);
        EXPECT_NEAR(s.slope_bid, bid_sum / (std::abs(best_bid - kth_bid) + 1e-12), 1e-6 * s.slope_bid);
        EXPECT_NEAR(s.slope_ask, ask_sum / (std::abs(kth_ask - best_ask) + 1e-12), 1e-6 * s.slope_ask);
        EXPECT_NEAR(s.imbalance, (bid_sum - ask_sum) / (bid_sum + ask_sum), 1e-12);
    }
}

TEST(Summarize, MidIsCentered) {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto sc = testing::random_book_scenario(seed, 10, 20);
        OrderBook b("BTC-USD");
        b.apply_snapshot(sc.snapshot);
        for (const auto& u : sc.updates) b.apply_update(u);
        if (b.bid_levels() == 0 || b.ask_levels() == 0) continue;
        const auto s = b.summarize();
        EXPECT_LE(s.best_bid, s.mid);
        EXPECT_LE(s.mid, s.best_ask);
        EXPECT_NEAR(s.mid - s.best_bid, s.best_ask - s.mid, std::nextafter(s.mid, 1e300) - s.mid);
        EXPECT_GE(s.imbalance, -1.0);
        EXPECT_LE(s.imbalance, 1.0);
    }
}

TEST(TopNView, FewerLevelsThanN) {
    OrderBook b("BTC-USD");
    b.apply_snapshot(snap({{"100", "1"}, {"99", "1"}, {"98", "1"}}, {{"101", "1"}, {"102", "1"}, {"103", "1"}}));
    const auto v = b.top_n_view(50);
    EXPECT_EQ(v.bids.size(), 3u);
    EXPECT_EQ(v.asks.size(), 3u);
}

TEST(TopNView, CapsAtN) {
    const auto sc = testing::random_book_scenario(5, 60, 0);
    OrderBook b("BTC-USD");
    b.apply_snapshot(sc.snapshot);
    const auto v = b.top_n_view(50);
    EXPECT_EQ(v.bids.size(), 50u);
    EXPECT_EQ(v.asks.size(), 50u);
}

TEST(TopNView, SnapshotRoundTrip) {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const auto sc = testing::random_book_scenario(seed, 40, 500);
        OrderBook b("BTC-USD");
        b.apply_snapshot(sc.snapshot);
        for (const auto& u : sc.updates) b.apply_update(u);
        const auto view = b.top_n_view(25);
        OrderBook c("BTC-USD");
        c.apply_snapshot(view);
        auto bb = testing::book_bids(b);
        auto ba = testing::book_asks(b);
        bb.resize(std::min<std::size_t>(bb.size(), 25));
        ba.resize(std::min<std::size_t>(ba.size(), 25));
        EXPECT_EQ(testing::book_bids(c), bb);
        EXPECT_EQ(testing::book_asks(c), ba);
    }
}

TEST(OrderBook, MatchesNaiveOracle) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::string why;
        EXPECT_TRUE(testing::book_matches_oracle(testing::random_book_scenario(seed, 50, 2000), &why)) << "seed " << seed << ": " << why;
    }
}

}  // namespace
}  // namespace lobnet::book
