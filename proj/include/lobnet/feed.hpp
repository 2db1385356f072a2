#pragma once

// Exchange streaming protocol: typed messages, the wire parser and the
// per-product sequence gate.
//
// Wire schema (one JSON text frame per message, Coinbase-exchange shapes):
//
//   {"type":"ticker","product_id":"BTC-USD","sequence":7,"price":"6400.01",
//    "best_bid":"6400.00","best_ask":"6400.01","last_size":"0.015",
//    "side":"buy","time":"2018-07-02T17:22:14.812000Z"}
//   {"type":"snapshot","product_id":"BTC-USD","sequence":5,
//    "bids":[["6400.00","1.5"],...],"asks":[["6400.01","0.2"],...]}
//   {"type":"l2update","product_id":"BTC-USD","sequence":6,
//    "time":"...","changes":[["buy","6400.00","1.5"]]}
//   {"type":"heartbeat","product_id":"BTC-USD","sequence":42,
//    "last_trade_id":17,"time":"..."}
//
// Any other "type" (subscriptions, status, ...) parses to Ignored.

#include "lobnet/decimal.hpp"
#include "lobnet/error.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace lobnet::feed {

enum class Side { Buy, Sell };
enum class MessageKind { Ticker, Snapshot, L2Update, Heartbeat };

std::string_view to_string(MessageKind kind) noexcept;
std::optional<MessageKind> kind_from_string(std::string_view wire_type) noexcept;
std::string_view to_string(Side side) noexcept;

inline constexpr int kSnapshotDepthLimit = 50;

struct PriceLevel {
    Decimal price;
    Decimal size;
    friend bool operator==(const PriceLevel&, const PriceLevel&) = default;
};

struct TickerBody {
    Decimal price;
    std::optional<Decimal> best_bid;
    std::optional<Decimal> best_ask;
    Decimal last_size;
    Side trade_side = Side::Buy;
    std::string exchange_time;
    friend bool operator==(const TickerBody&, const TickerBody&) = default;
};

struct L2Change {
    Side side = Side::Buy;
    Decimal price;
    Decimal new_size;
    friend bool operator==(const L2Change&, const L2Change&) = default;
};

struct L2UpdateBody {
    std::vector<L2Change> changes;
    friend bool operator==(const L2UpdateBody&, const L2UpdateBody&) = default;
};

/// Bids descending, asks ascending, no duplicate prices per side.
struct SnapshotBody {
    std::vector<PriceLevel> bids;
    std::vector<PriceLevel> asks;
    int depth_limit = kSnapshotDepthLimit;
    friend bool operator==(const SnapshotBody&, const SnapshotBody&) = default;
};

struct HeartbeatBody {
    std::int64_t last_trade_id = 0;
    friend bool operator==(const HeartbeatBody&, const HeartbeatBody&) = default;
};

using Payload = std::variant<TickerBody, SnapshotBody, L2UpdateBody, HeartbeatBody>;

struct FeedMessage {
    MessageKind kind = MessageKind::Heartbeat;
    std::string product;
    std::int64_t sequence = 0;
    std::int64_t recv_time_ns = 0;
    Payload payload;
    std::string raw;

    friend bool operator==(const FeedMessage&, const FeedMessage&) = default;
};

/// A well-formed frame whose type this pipeline does not consume.
struct Ignored {
    std::string type;
    std::string raw;
};

/// MalformedFrame or MissingField, with the raw text for the quarantine log.
struct ParseFailure {
    Errc code = Errc::MalformedFrame;
    std::string detail;
    std::string raw;
};

using ParseResult = std::variant<FeedMessage, Ignored, ParseFailure>;

/// Total over its input: every frame yields exactly one alternative.
ParseResult parse_message(std::string_view raw, std::int64_t recv_time_ns);

/// Canonical wire text for a message (used by fixture generators).
std::string render_message(const FeedMessage& msg);

struct GapSignal {
    std::string product;
    std::int64_t expected = 0;
    std::int64_t got = 0;
    friend bool operator==(const GapSignal&, const GapSignal&) = default;
};

/// Keeps each product's emitted stream contiguous. On a sequence jump it
/// signals the gap once and withholds everything but a Snapshot until one
/// arrives; stale or duplicate sequences are dropped silently.
class SequenceGate {
public:
    enum class Action { Pass, Gap, Suppressed, Stale };

    struct Verdict {
        Action action = Action::Pass;
        std::optional<GapSignal> gap;
    };

    Verdict admit(const FeedMessage& msg);

    /// Forces a resync (e.g. after a reconnect): nothing but a Snapshot
    /// passes for `product` until one arrives.
    void invalidate(const std::string& product);

    bool awaiting_snapshot(const std::string& product) const;
    std::uint64_t suppressed() const noexcept { return suppressed_; }
    std::uint64_t stale() const noexcept { return stale_; }

private:
    struct ProductState {
        std::optional<std::int64_t> last;
        bool awaiting_snapshot = false;
    };
    std::map<std::string, ProductState, std::less<>> state_;
    std::uint64_t suppressed_ = 0;
    std::uint64_t stale_ = 0;
};

using GateOutput = std::variant<FeedMessage, GapSignal>;

/// Runs a whole batch through a fresh gate.
std::vector<GateOutput> sequence_gate(const std::vector<FeedMessage>& messages);

}  // namespace lobnet::feed
