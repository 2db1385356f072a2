#include "lobnet/synthetic.hpp"

#include "lobnet/decimal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <map>
#include <random>

namespace lobnet::synthetic {

using features::BinaryLabel;
using features::Sample;

namespace {

double score(const StreamConfig& c, std::size_t i, std::span<const double> x) {
    const double a = x[c.feature_a] - c.mean_shift;
    switch (c.pattern) {
        case Pattern::Planted:
        case Pattern::Memoryless: return a;
        case Pattern::RegimeFlip: return i < c.flip_at ? a : -a;
        case Pattern::RotatingDrift: {
            const double theta = c.theta0 + c.drift_rate * static_cast<double>(i);
            return std::cos(theta) * a + std::sin(theta) * (x[c.feature_b] - c.mean_shift);
        }
    }
    return a;
}

}  // namespace

bool rule_up(const StreamConfig& config, std::size_t i, std::span<const double> x) {
    return score(config, i, x) > 0.0;
}

std::vector<Sample> generate(const StreamConfig& c) {
    if (c.steps == 0 || c.dim == 0) throw Error(Errc::PreconditionViolation, "steps and dim must be positive");
    if (c.feature_a >= c.dim || c.feature_b >= c.dim) throw Error(Errc::PreconditionViolation, "planted feature out of range");
    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double innovation = std::sqrt(1.0 - c.persistence * c.persistence);

    const std::size_t ticks = c.samples + c.steps - 1;
    std::vector<double> rows(ticks * c.dim);
    std::vector<double> prev(c.dim, 0.0);
    for (std::size_t t = 0; t < ticks; ++t) {
        for (std::size_t j = 0; j < c.dim; ++j) {
            const double v = t == 0 ? gauss(rng) : c.persistence * prev[j] + innovation * gauss(rng);
            prev[j] = v;
            rows[t * c.dim + j] = v + c.mean_shift;
        }
    }

    std::vector<Sample> out;
    out.reserve(c.samples);
    for (std::size_t i = 0; i < c.samples; ++i) {
        const std::size_t newest = i + c.steps - 1;
        Sample s;
        s.steps = c.steps;
        s.dim = c.dim;
        s.window.assign(rows.begin() + static_cast<std::ptrdiff_t>(i * c.dim),
                        rows.begin() + static_cast<std::ptrdiff_t>((newest + 1) * c.dim));
        s.t = static_cast<std::int64_t>(newest);
        s.time_ns = c.start_ns + static_cast<std::int64_t>(newest) * c.tick_ns;
        s.product = c.product;
        const auto x = s.row(c.steps - 1);
        double sc = c.pattern == Pattern::Memoryless ? gauss(rng) : score(c, i, x);
        const bool flip = unit(rng) < c.noise;
        if (flip) sc = -sc;
        if (sc == 0.0) sc = 1e-9;
        s.binary = sc > 0.0 ? BinaryLabel::Up : BinaryLabel::Down;
        const double eps = 0.1 * gauss(rng);
        double r = 0.002 * (1.5 * std::abs(sc) + std::abs(eps));
        if (sc < 0.0) r = -r;
        s.r = r;
        s.multi = features::classify_relative_change(r);
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

struct SimBook {
    std::int64_t mid = 0;  // price units, half-tick free: bids < mid < asks
    std::map<std::int64_t, std::int64_t, std::greater<>> bids;  // units -> size in 1e-4
    std::map<std::int64_t, std::int64_t> asks;
    std::int64_t sequence = 0;
    std::int64_t trade_id = 0;
};

constexpr int kDecimals = 2;
constexpr int kSizeDecimals = 4;

Decimal price_dec(std::int64_t units) { return Decimal::from_scaled(units, kDecimals); }
Decimal size_dec(std::int64_t units) { return Decimal::from_scaled(units, kSizeDecimals); }

std::string iso_time(std::int64_t ns) {
    const std::time_t secs = static_cast<std::time_t>(ns / 1'000'000'000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    const auto micros = static_cast<long>((ns % 1'000'000'000) / 1000);
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%06ldZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, micros);
    return buf;
}

}  // namespace

std::vector<Frame> simulate_market(const MarketConfig& c) {
    if (c.products.empty()) throw Error(Errc::PreconditionViolation, "no products to simulate");
    if (c.levels < 2) throw Error(Errc::PreconditionViolation, "need at least 2 levels per side");
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::int64_t> size_units(1, 50'000);

    std::vector<SimBook> books(c.products.size());
    std::vector<Frame> frames;
    auto emit = [&](std::size_t p, feed::MessageKind kind, feed::Payload payload, std::int64_t ns) {
        feed::FeedMessage m;
        m.kind = kind;
        m.product = c.products[p];
        m.sequence = ++books[p].sequence;
        m.payload = std::move(payload);
        frames.push_back({ns, feed::render_message(m)});
    };

    std::int64_t now = c.start_ns;
    for (std::size_t p = 0; p < books.size(); ++p) {
        SimBook& b = books[p];
        b.sequence = static_cast<std::int64_t>(1000 * (p + 1));
        b.mid = 640'000 + static_cast<std::int64_t>(p) * 10'000;
        feed::SnapshotBody snap;
        for (int k = 0; k < c.levels; ++k) {
            b.bids[b.mid - 1 - k] = size_units(rng);
            b.asks[b.mid + 1 + k] = size_units(rng);
        }
        for (auto [px, sz] : b.bids) snap.bids.push_back({price_dec(px), size_dec(sz)});
        for (auto [px, sz] : b.asks) snap.asks.push_back({price_dec(px), size_dec(sz)});
        emit(p, feed::MessageKind::Snapshot, std::move(snap), now);
        now += c.spacing_ns / static_cast<std::int64_t>(books.size());
    }

    for (std::size_t e = 0; e < c.events; ++e) {
        for (std::size_t p = 0; p < books.size(); ++p) {
            SimBook& b = books[p];
            now += c.spacing_ns / static_cast<std::int64_t>(books.size());
            const double u = unit(rng);
            if (u < c.heartbeat_probability) {
                emit(p, feed::MessageKind::Heartbeat, feed::HeartbeatBody{b.trade_id}, now);
                continue;
            }
            if (u < c.heartbeat_probability + c.ticker_probability) {
                const bool buy = unit(rng) < 0.5;
                feed::TickerBody tk;
                const std::int64_t px = buy ? b.asks.begin()->first : b.bids.begin()->first;
                tk.price = price_dec(px);
                tk.best_bid = price_dec(b.bids.begin()->first);
                tk.best_ask = price_dec(b.asks.begin()->first);
                tk.last_size = size_dec(size_units(rng) / 10 + 1);
                tk.trade_side = buy ? feed::Side::Buy : feed::Side::Sell;
                tk.exchange_time = iso_time(now);
                ++b.trade_id;
                emit(p, feed::MessageKind::Ticker, std::move(tk), now);
                continue;
            }
            feed::L2UpdateBody up;
            const double v = unit(rng);
            if (v < 0.25) {
                // Mid moves one unit: the touched best level leaves, a new
                // level opens on the other side of the spread.
                const bool upward = unit(rng) < 0.5;
                if (upward) {
                    const auto best_ask = b.asks.begin()->first;
                    b.asks.erase(b.asks.begin());
                    up.changes.push_back({feed::Side::Sell, price_dec(best_ask), size_dec(0)});
                    const std::int64_t sz = size_units(rng);
                    b.bids[best_ask - 1] = sz;
                    up.changes.push_back({feed::Side::Buy, price_dec(best_ask - 1), size_dec(sz)});
                    const std::int64_t far = b.asks.rbegin()->first + 1;
                    b.asks[far] = size_units(rng);
                    up.changes.push_back({feed::Side::Sell, price_dec(far), size_dec(b.asks[far])});
                } else {
                    const auto best_bid = b.bids.begin()->first;
                    b.bids.erase(b.bids.begin());
                    up.changes.push_back({feed::Side::Buy, price_dec(best_bid), size_dec(0)});
                    const std::int64_t sz = size_units(rng);
                    b.asks[best_bid + 1] = sz;
                    up.changes.push_back({feed::Side::Sell, price_dec(best_bid + 1), size_dec(sz)});
                    const std::int64_t far = b.bids.rbegin()->first - 1;
                    b.bids[far] = size_units(rng);
                    up.changes.push_back({feed::Side::Buy, price_dec(far), size_dec(b.bids[far])});
                }
                // Trim the far ends back to the configured depth.
                while (static_cast<int>(b.bids.size()) > c.levels) {
                    auto last = std::prev(b.bids.end());
                    up.changes.push_back({feed::Side::Buy, price_dec(last->first), size_dec(0)});
                    b.bids.erase(last);
                }
                while (static_cast<int>(b.asks.size()) > c.levels) {
                    auto last = std::prev(b.asks.end());
                    up.changes.push_back({feed::Side::Sell, price_dec(last->first), size_dec(0)});
                    b.asks.erase(last);
                }
            } else {
                const int n = 1 + static_cast<int>(unit(rng) * 3);
                for (int k = 0; k < n; ++k) {
                    const bool bid = unit(rng) < 0.5;
                    const int depth = static_cast<int>(unit(rng) * std::min(c.levels, 10));
                    const std::int64_t sz = size_units(rng);
                    if (bid) {
                        auto it = std::next(b.bids.begin(), std::min<std::ptrdiff_t>(depth, static_cast<std::ptrdiff_t>(b.bids.size()) - 1));
                        it->second = sz;
                        up.changes.push_back({feed::Side::Buy, price_dec(it->first), size_dec(sz)});
                    } else {
                        auto it = std::next(b.asks.begin(), std::min<std::ptrdiff_t>(depth, static_cast<std::ptrdiff_t>(b.asks.size()) - 1));
                        it->second = sz;
                        up.changes.push_back({feed::Side::Sell, price_dec(it->first), size_dec(sz)});
                    }
                }
            }
            emit(p, feed::MessageKind::L2Update, std::move(up), now);
        }
    }
    return frames;
}

}  // namespace lobnet::synthetic
