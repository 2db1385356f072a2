#pragma once

// Where raw frames come from: a recorded capture or a live connection.
// Both yield wire text plus the local receive time; parsing, capture and
// the sequence gate happen downstream, identically for either source.

#include "lobnet/error.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lobnet::feed {

inline constexpr const char* kChannelTicker = "ticker";
inline constexpr const char* kChannelLevel2 = "level2";
inline constexpr const char* kChannelHeartbeat = "heartbeat";

struct Subscription {
    std::vector<std::string> products;
    std::vector<std::string> channels{kChannelTicker, kChannelLevel2, kChannelHeartbeat};
};

/// PreconditionViolation on no products, or a channel outside
/// {ticker, level2, heartbeat}.
void validate(const Subscription& sub);

/// {"type":"subscribe","product_ids":[...],"channels":[...]}
std::string subscribe_frame(const Subscription& sub);

struct SourceFrame {
    std::int64_t recv_time_ns = 0;
    std::string raw;
    /// Set on the first frame after a reconnect: per-product state
    /// downstream is stale and must wait for a fresh snapshot.
    bool resync = false;
};

class Source {
public:
    virtual ~Source() = default;
    /// Next frame in delivery order; empty once the source is exhausted
    /// or stopped.
    virtual std::optional<SourceFrame> next() = 0;
};

}  // namespace lobnet::feed
