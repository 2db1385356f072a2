#include "lobnet/live.hpp"

#include "lobnet/feed.hpp"

#include "json.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/ssl.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/ssl.hpp>
#include <boost/beast/websocket.hpp>
#include <boost/beast/websocket/ssl.hpp>

#include <sys/socket.h>

#include <chrono>

namespace lobnet::feed {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::ordered_json;

namespace {

std::int64_t now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

}  // namespace

Endpoint parse_endpoint(const std::string& url) {
    Endpoint ep;
    std::string rest;
    if (url.rfind("wss://", 0) == 0) {
        ep.tls = true;
        rest = url.substr(6);
    } else if (url.rfind("ws://", 0) == 0) {
        rest = url.substr(5);
    } else {
        throw Error(Errc::ConfigError, "endpoint must start with ws:// or wss://: " + url);
    }
    const auto slash = rest.find('/');
    std::string authority = rest.substr(0, slash);
    if (slash != std::string::npos) ep.target = rest.substr(slash);
    const auto colon = authority.rfind(':');
    if (colon != std::string::npos) {
        ep.port = authority.substr(colon + 1);
        authority.resize(colon);
        if (ep.port.empty() || ep.port.find_first_not_of("0123456789") != std::string::npos) {
            throw Error(Errc::ConfigError, "bad port in endpoint " + url);
        }
    } else {
        ep.port = ep.tls ? "443" : "80";
    }
    if (authority.empty()) throw Error(Errc::ConfigError, "endpoint has no host: " + url);
    ep.host = authority;
    return ep;
}

std::chrono::milliseconds backoff_delay(std::size_t attempt, std::chrono::milliseconds initial,
                                        std::chrono::milliseconds cap) {
    auto d = initial;
    for (std::size_t i = 0; i < attempt && d < cap; ++i) d *= 2;
    return std::min(d, cap);
}

std::string SequenceStamper::stamp(const std::string& raw) {
    auto j = ordered_json::parse(raw, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return raw;
    const auto type = j.find("type");
    const auto product = j.find("product_id");
    if (type == j.end() || !type->is_string() || product == j.end() || !product->is_string()) return raw;
    if (!kind_from_string(type->get<std::string>())) return raw;
    const std::string id = product->get<std::string>();
    auto it = next_.find(id);
    if (it == next_.end()) it = next_.emplace(id, 1).first;
    if (j.contains("sequence")) j["exchange_sequence"] = j["sequence"];
    j["sequence"] = it->second++;
    return j.dump();
}

class LiveSource::Connection {
public:
    using Plain = websocket::stream<tcp::socket>;
    using Secure = websocket::stream<beast::ssl_stream<tcp::socket>>;

    explicit Connection(const Endpoint& ep) : ssl_(asio::ssl::context::tls_client) {
        tcp::resolver resolver(io_);
        const auto results = resolver.resolve(ep.host, ep.port);
        if (ep.tls) {
            ssl_.set_default_verify_paths();
            ssl_.set_verify_mode(asio::ssl::verify_peer);
            secure_ = std::make_unique<Secure>(io_, ssl_);
            auto& ws = *secure_;
            asio::connect(beast::get_lowest_layer(ws), results);
            if (!SSL_set_tlsext_host_name(ws.next_layer().native_handle(), ep.host.c_str())) {
                throw Error(Errc::ConnectFailed, "cannot set TLS server name");
            }
            ws.next_layer().set_verify_callback(asio::ssl::host_name_verification(ep.host));
            ws.next_layer().handshake(asio::ssl::stream_base::client);
            ws.handshake(ep.host, ep.target);
        } else {
            plain_ = std::make_unique<Plain>(io_);
            auto& ws = *plain_;
            asio::connect(ws.next_layer(), results);
            ws.handshake(ep.host + ":" + ep.port, ep.target);
        }
    }

    template <typename F>
    decltype(auto) with(F&& f) {
        if (secure_) return f(*secure_);
        return f(*plain_);
    }

    int fd() {
        return with([](auto& ws) { return static_cast<int>(beast::get_lowest_layer(ws).native_handle()); });
    }

    void write(const std::string& text) {
        with([&](auto& ws) {
            ws.text(true);
            ws.write(asio::buffer(text));
        });
    }

    /// Throws boost::system::system_error when the connection drops.
    std::string read() {
        beast::flat_buffer buf;
        with([&](auto& ws) { ws.read(buf); });
        return beast::buffers_to_string(buf.data());
    }

    void close() {
        beast::error_code ec;
        with([&](auto& ws) { ws.close(websocket::close_code::normal, ec); });
    }

    /// Frames that arrived before the subscription ack.
    std::vector<SourceFrame> early;

private:
    asio::io_context io_;
    asio::ssl::context ssl_;
    std::unique_ptr<Plain> plain_;
    std::unique_ptr<Secure> secure_;
};

LiveSource::LiveSource(LiveOptions options) : options_(std::move(options)) {
    validate(options_.subscription);
    endpoint_ = parse_endpoint(options_.url);
}

LiveSource::~LiveSource() { stop(); }

std::unique_ptr<LiveSource::Connection> LiveSource::connect_and_subscribe() {
    std::unique_ptr<Connection> conn;
    try {
        conn = std::make_unique<Connection>(endpoint_);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(Errc::ConnectFailed, options_.url + ": " + e.what());
    }
    active_fd_ = conn->fd();

    // watchdog: a silent server must not block the subscribe forever
    std::mutex m;
    std::condition_variable cv;
    bool acked = false;
    const int fd = conn->fd();
    std::thread watchdog([&] {
        std::unique_lock lock(m);
        if (!cv.wait_for(lock, options_.subscribe_timeout, [&] { return acked; })) ::shutdown(fd, SHUT_RDWR);
    });
    const auto release = [&] {
        {
            std::lock_guard lock(m);
            acked = true;
        }
        cv.notify_all();
        watchdog.join();
    };

    try {
        conn->write(subscribe_frame(options_.subscription));
        while (true) {
            std::string raw = conn->read();
            const auto j = ordered_json::parse(raw, nullptr, false);
            const std::string type = j.is_object() && j.contains("type") && j["type"].is_string() ? j["type"].get<std::string>() : "";
            if (type == "subscriptions") break;
            if (type == "error") {
                release();
                throw Error(Errc::SubscribeRejected, j.value("message", std::string("subscription refused")) + " " +
                                                         j.value("reason", std::string()));
            }
            conn->early.push_back({now_ns(), std::move(raw), false});
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        release();
        throw Error(Errc::ConnectFailed, "no subscription ack from " + options_.url + ": " + e.what());
    }
    release();
    return conn;
}

void LiveSource::start() {
    if (reader_.joinable()) throw Error(Errc::PreconditionViolation, "live source already started");
    auto conn = connect_and_subscribe();
    reader_ = std::thread([this, c = std::move(conn)]() mutable { run(std::move(c)); });
}

void LiveSource::stop() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    cv_.notify_all();
    const int fd = active_fd_.load();
    if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
    if (reader_.joinable()) reader_.join();
    {
        std::lock_guard lock(mutex_);
        finished_ = true;
    }
    cv_.notify_all();
}

void LiveSource::push(SourceFrame frame) {
    {
        std::lock_guard lock(mutex_);
        if (resync_next_) {
            frame.resync = true;
            resync_next_ = false;
        }
        queue_.push_back(std::move(frame));
        if (queue_.size() > options_.queue_capacity) {
            queue_.pop_front();
            ++dropped_;
        }
    }
    cv_.notify_one();
}

void LiveSource::run(std::unique_ptr<Connection> conn) {
    while (!stopping_) {
        for (auto& f : conn->early) push({f.recv_time_ns, stamper_.stamp(f.raw), false});
        conn->early.clear();
        try {
            while (!stopping_) {
                std::string raw = conn->read();
                push({now_ns(), stamper_.stamp(raw), false});
            }
        } catch (const std::exception&) {
        }
        active_fd_ = -1;
        conn.reset();
        if (stopping_) break;

        {
            std::lock_guard lock(mutex_);
            resync_next_ = true;
        }
        for (std::size_t attempt = 0; !stopping_; ++attempt) {
            const auto delay = backoff_delay(attempt, options_.initial_backoff, options_.max_backoff);
            {
                std::unique_lock lock(mutex_);
                cv_.wait_for(lock, delay, [this] { return stopping_.load(); });
            }
            if (stopping_) break;
            try {
                conn = connect_and_subscribe();
                ++reconnects_;
                break;
            } catch (const Error&) {
            }
        }
        if (!conn) break;
    }
    {
        std::lock_guard lock(mutex_);
        finished_ = true;
    }
    cv_.notify_all();
}

std::optional<SourceFrame> LiveSource::next() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [this] { return !queue_.empty() || finished_; });
    if (queue_.empty()) return std::nullopt;
    auto f = std::move(queue_.front());
    queue_.pop_front();
    return f;
}

std::optional<SourceFrame> LiveSource::next_for(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, timeout, [this] { return !queue_.empty() || finished_; });
    if (queue_.empty()) return std::nullopt;
    auto f = std::move(queue_.front());
    queue_.pop_front();
    return f;
}

}  // namespace lobnet::feed
