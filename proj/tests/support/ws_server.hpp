#pragma once

// Minimal scripted WebSocket server on 127.0.0.1 for exercising the live source.

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <functional>
#include <string>
#include <thread>

namespace lobnet::testing {

class ScriptedWsServer {
public:
    using Socket = boost::beast::websocket::stream<boost::asio::ip::tcp::socket>;
    /// Called once per accepted connection with its 0-based index.
    using Script = std::function<void(Socket&, int)>;

    ScriptedWsServer(int connections, Script script)
        : acceptor_(io_, {boost::asio::ip::make_address("127.0.0.1"), 0}) {
        port_ = acceptor_.local_endpoint().port();
        thread_ = std::thread([this, connections, script = std::move(script)] {
            for (int i = 0; i < connections; ++i) {
                boost::asio::ip::tcp::socket sock(io_);
                boost::system::error_code ec;
                acceptor_.accept(sock, ec);
                if (ec) return;
                try {
                    Socket ws(std::move(sock));
                    ws.accept();
                    script(ws, i);
                } catch (const std::exception&) {
                }
            }
        });
    }

    ~ScriptedWsServer() {
        boost::system::error_code ec;
        acceptor_.close(ec);
        if (thread_.joinable()) thread_.join();
    }

    std::string url() const { return "ws://127.0.0.1:" + std::to_string(port_) + "/"; }

    static std::string read_text(Socket& ws) {
        boost::beast::flat_buffer buf;
        ws.read(buf);
        return boost::beast::buffers_to_string(buf.data());
    }

    static void send(Socket& ws, const std::string& text) {
        ws.text(true);
        ws.write(boost::asio::buffer(text));
    }

    static void close(Socket& ws) {
        boost::system::error_code ec;
        ws.close(boost::beast::websocket::close_code::normal, ec);
    }

private:
    boost::asio::io_context io_;
    boost::asio::ip::tcp::acceptor acceptor_;
    unsigned short port_ = 0;
    std::thread thread_;
};

}  // namespace lobnet::testing
