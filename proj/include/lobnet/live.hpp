#pragma once

// Live exchange feed over WebSocket (ws:// or wss://).

#include "lobnet/source.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace lobnet::feed {

struct Endpoint {
    bool tls = false;
    std::string host;
    std::string port;
    std::string target = "/";
};

/// Parses ws://host[:port][/path] and wss://...; throws ConfigError.
Endpoint parse_endpoint(const std::string& url);

/// min(initial * 2^attempt, cap)
std::chrono::milliseconds backoff_delay(std::size_t attempt, std::chrono::milliseconds initial = std::chrono::milliseconds(500),
                                        std::chrono::milliseconds cap = std::chrono::seconds(30));

struct LiveOptions {
    std::string url = "wss://ws-feed.pro.coinbase.com";
    Subscription subscription;
    std::chrono::milliseconds initial_backoff{500};
    std::chrono::milliseconds max_backoff{30'000};
    std::chrono::milliseconds subscribe_timeout{10'000};
    /// Frames buffered for the consumer; the oldest are dropped beyond it.
    std::size_t queue_capacity = 1'000'000;
};

/// Rewrites "sequence" on feed messages with a contiguous per-product local
/// counter (the exchange value, if any, moves to "exchange_sequence").
/// Frames of other types pass through unchanged.
class SequenceStamper {
public:
    std::string stamp(const std::string& raw);

private:
    std::map<std::string, std::int64_t, std::less<>> next_;
};

/// One connection at a time, read on a background thread. start() makes
/// the first connection synchronously and reports ConnectFailed or
/// SubscribeRejected; later drops reconnect with exponential backoff and
/// flag the next frame with `resync`.
class LiveSource final : public Source {
public:
    explicit LiveSource(LiveOptions options);
    ~LiveSource() override;
    LiveSource(const LiveSource&) = delete;
    LiveSource& operator=(const LiveSource&) = delete;

    void start();
    void stop();

    std::optional<SourceFrame> next() override;
    /// Like next() but gives up after `timeout`.
    std::optional<SourceFrame> next_for(std::chrono::milliseconds timeout);

    std::uint64_t reconnects() const noexcept { return reconnects_; }
    std::uint64_t dropped() const noexcept { return dropped_; }

private:
    class Connection;

    std::unique_ptr<Connection> connect_and_subscribe();
    void run(std::unique_ptr<Connection> conn);
    void push(SourceFrame frame);

    LiveOptions options_;
    Endpoint endpoint_;
    SequenceStamper stamper_;

    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<SourceFrame> queue_;
    bool finished_ = false;
    bool resync_next_ = false;
    std::atomic<bool> stopping_{false};
    std::atomic<int> active_fd_{-1};
    std::atomic<std::uint64_t> reconnects_{0};
    std::atomic<std::uint64_t> dropped_{0};
    std::thread reader_;
};

}  // namespace lobnet::feed
