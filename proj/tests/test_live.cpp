#include "lobnet/live.hpp"
#include "lobnet/pipeline.hpp"

#include "json.hpp"
#include "support/ws_server.hpp"

#include <gtest/gtest.h>

#include <atomic>

namespace lobnet::feed {
namespace {

using lobnet::testing::ScriptedWsServer;
using nlohmann::json;

const std::string kAck = R"({"type":"subscriptions","channels":[]})";

std::string heartbeat(const std::string& product, std::int64_t seq) {
    return R"({"type":"heartbeat","product_id":")" + product + R"(","sequence":)" + std::to_string(seq) +
           R"(,"last_trade_id":1,"time":"2018-07-02T00:00:00.000000Z"})";
}

LiveOptions options_for(const ScriptedWsServer& server) {
    LiveOptions o;
    o.url = server.url();
    o.subscription.products = {"BTC-USD"};
    o.initial_backoff = std::chrono::milliseconds(20);
    o.subscribe_timeout = std::chrono::milliseconds(2000);
    return o;
}

TEST(Endpoint, Parsing) {
    const auto a = parse_endpoint("wss://ws-feed.pro.coinbase.com");
    EXPECT_TRUE(a.tls);
    EXPECT_EQ(a.host, "ws-feed.pro.coinbase.com");
    EXPECT_EQ(a.port, "443");
    EXPECT_EQ(a.target, "/");
    const auto b = parse_endpoint("ws://127.0.0.1:9001/feed");
    EXPECT_FALSE(b.tls);
    EXPECT_EQ(b.host, "127.0.0.1");
    EXPECT_EQ(b.port, "9001");
    EXPECT_EQ(b.target, "/feed");
    for (const char* bad : {"http://x", "ws://", "ws://host:", "ws://host:x1"}) EXPECT_THROW(parse_endpoint(bad), Error) << bad;
}

TEST(Backoff, DoublesFromHalfSecondToThirtySeconds) {
    using std::chrono::milliseconds;
    EXPECT_EQ(backoff_delay(0), milliseconds(500));
    EXPECT_EQ(backoff_delay(1), milliseconds(1000));
    EXPECT_EQ(backoff_delay(5), milliseconds(16000));
    EXPECT_EQ(backoff_delay(6), milliseconds(30000));
    EXPECT_EQ(backoff_delay(60), milliseconds(30000));
}

TEST(SequenceStamper, ContiguousPerProduct) {
    SequenceStamper s;
    const auto a = json::parse(s.stamp(heartbeat("BTC-USD", 900)));
    const auto b = json::parse(s.stamp(heartbeat("ETH-USD", 5)));
    const auto c = json::parse(s.stamp(R"({"type":"l2update","product_id":"BTC-USD","changes":[]})"));
    EXPECT_EQ(a["sequence"], 1);
    EXPECT_EQ(a["exchange_sequence"], 900);
    EXPECT_EQ(b["sequence"], 1);
    EXPECT_EQ(c["sequence"], 2);
    EXPECT_FALSE(c.contains("exchange_sequence"));
    EXPECT_EQ(s.stamp(kAck), kAck);
    EXPECT_EQ(s.stamp("not json"), "not json");
}

TEST(LiveSource, SubscribesAndStreams) {
    std::string subscribe;
    ScriptedWsServer server(1, [&](auto& ws, int) {
        subscribe = ScriptedWsServer::read_text(ws);
        ScriptedWsServer::send(ws, kAck);
        ScriptedWsServer::send(ws, heartbeat("BTC-USD", 100));
        ScriptedWsServer::send(ws, heartbeat("BTC-USD", 250));
        ScriptedWsServer::send(ws, heartbeat("BTC-USD", 251));
        ScriptedWsServer::read_text(ws);  // until the client goes away
    });
    LiveSource src(options_for(server));
    src.start();
    for (std::int64_t i = 1; i <= 3; ++i) {
        const auto f = src.next_for(std::chrono::seconds(5));
        ASSERT_TRUE(f);
        EXPECT_FALSE(f->resync);
        EXPECT_EQ(json::parse(f->raw)["sequence"], i);
        EXPECT_GT(f->recv_time_ns, 0);
    }
    src.stop();
    EXPECT_EQ(json::parse(subscribe)["type"], "subscribe");
    EXPECT_EQ(json::parse(subscribe)["product_ids"], json::array({"BTC-USD"}));
    EXPECT_FALSE(src.next());
}

TEST(LiveSource, ReconnectFlagsResync) {
    ScriptedWsServer server(2, [&](auto& ws, int conn) {
        ScriptedWsServer::read_text(ws);
        ScriptedWsServer::send(ws, kAck);
        ScriptedWsServer::send(ws, heartbeat("BTC-USD", 10 * conn + 1));
        ScriptedWsServer::send(ws, heartbeat("BTC-USD", 10 * conn + 2));
        if (conn == 0) {
            ScriptedWsServer::close(ws);
        } else {
            ScriptedWsServer::read_text(ws);
        }
    });
    LiveSource src(options_for(server));
    src.start();
    std::vector<SourceFrame> frames;
    while (frames.size() < 4) {
        auto f = src.next_for(std::chrono::seconds(5));
        ASSERT_TRUE(f);
        frames.push_back(*f);
    }
    src.stop();
    EXPECT_EQ(src.reconnects(), 1u);
    EXPECT_FALSE(frames[0].resync);
    EXPECT_FALSE(frames[1].resync);
    EXPECT_TRUE(frames[2].resync);
    EXPECT_FALSE(frames[3].resync);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(json::parse(frames[i].raw)["sequence"], static_cast<int>(i + 1));

    // the resync holds back the product until a snapshot arrives
    pipeline::FeedPipeline p;
    for (const auto& f : frames) p.on_frame(f);
    EXPECT_EQ(p.counters().resyncs, 1u);
    EXPECT_EQ(p.counters().suppressed, 2u);
}

TEST(LiveSource, SubscribeRejected) {
    ScriptedWsServer server(1, [&](auto& ws, int) {
        ScriptedWsServer::read_text(ws);
        ScriptedWsServer::send(ws, R"({"type":"error","message":"Failed to subscribe","reason":"BAD-PAIR is not a valid product"})");
        ScriptedWsServer::read_text(ws);
    });
    LiveSource src(options_for(server));
    try {
        src.start();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::SubscribeRejected);
        EXPECT_NE(std::string(e.what()).find("BAD-PAIR"), std::string::npos);
    }
}

TEST(LiveSource, SilentServerTimesOut) {
    ScriptedWsServer server(1, [&](auto& ws, int) {
        ScriptedWsServer::read_text(ws);
        ScriptedWsServer::read_text(ws);
    });
    auto opt = options_for(server);
    opt.subscribe_timeout = std::chrono::milliseconds(200);
    LiveSource src(opt);
    try {
        src.start();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ConnectFailed);
    }
}

TEST(LiveSource, ConnectFailed) {
    unsigned short port = 0;
    {
        boost::asio::io_context io;
        boost::asio::ip::tcp::acceptor a(io, {boost::asio::ip::make_address("127.0.0.1"), 0});
        port = a.local_endpoint().port();
    }
    LiveOptions o;
    o.url = "ws://127.0.0.1:" + std::to_string(port);
    o.subscription.products = {"BTC-USD"};
    LiveSource src(o);
    try {
        src.start();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ConnectFailed);
    }
}

TEST(LiveSource, EmptySubscriptionRejectedUpFront) {
    LiveOptions o;
    EXPECT_THROW(LiveSource{o}, Error);
}

}  // namespace
}  // namespace lobnet::feed
