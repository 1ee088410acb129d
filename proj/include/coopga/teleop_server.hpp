#pragma once

#include <chrono>
#include <csignal>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <ostream>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "teleop.hpp"

namespace coopga::teleop {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct ServerOptions {
    std::string address = "127.0.0.1";
    unsigned short port = 8765;  // 0 picks a free port
    std::ostream* tee = nullptr;  // state stream as NDJSON
    std::int64_t max_ticks = -1;  // stop after this many ticks; negative runs until stop()
    std::size_t max_queue = 64;   // per-client outgoing queue; older states are dropped first
    bool handle_signals = false;  // stop on SIGINT / SIGTERM
};

// Websocket front end. A single io_context thread runs the accept loop, every client's reads and
// writes and the fixed-rate control timer, so the session is only ever touched from that thread.
class Server {
public:
    Server(Session session, ServerOptions opt)
        : session_(std::move(session)), opt_(std::move(opt)), acceptor_(ioc_), timer_(ioc_), signals_(ioc_)
    {
        tcp::endpoint ep(net::ip::make_address(opt_.address), opt_.port);
        acceptor_.open(ep.protocol());
        acceptor_.set_option(net::socket_base::reuse_address(true));
        acceptor_.bind(ep);
        acceptor_.listen(net::socket_base::max_listen_connections);
    }

    unsigned short port() const { return acceptor_.local_endpoint().port(); }

    // Blocks until stop(), a signal, or max_ticks.
    void run()
    {
        start_ = std::chrono::steady_clock::now();
        next_ = start_;
        do_accept();
        schedule();
        if (opt_.handle_signals) {
            signals_.add(SIGINT);
            signals_.add(SIGTERM);
            signals_.async_wait([this](beast::error_code ec, int) {
                if (!ec) shutdown();
            });
        }
        ioc_.run();
    }

    // Safe from any thread.
    void stop()
    {
        net::post(ioc_, [this] { shutdown(); });
    }

    // Only valid once run() has returned.
    const Session& session() const { return session_; }

private:
    class Connection : public std::enable_shared_from_this<Connection> {
    public:
        Connection(tcp::socket socket, Server& srv, int id) : ws_(std::move(socket)), srv_(srv), id_(id) {}

        int id() const { return id_; }

        void start()
        {
            ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
            ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
                if (ec) return;
                self->open_ = true;
                self->srv_.on_open(self);
                self->do_read();
            });
        }

        void send(std::shared_ptr<const std::string> msg, bool droppable)
        {
            if (!open_) return;
            // latest wins: drop the oldest queued state that is not being written
            if (queue_.size() >= srv_.opt_.max_queue) {
                for (auto it = queue_.begin() + (writing_ ? 1 : 0); it != queue_.end(); ++it)
                    if (it->second) {
                        queue_.erase(it);
                        break;
                    }
            }
            queue_.emplace_back(std::move(msg), droppable);
            if (!writing_) do_write();
        }

        void close()
        {
            if (!open_) return;
            open_ = false;
            beast::error_code ec;
            beast::get_lowest_layer(ws_).socket().close(ec);
        }

    private:
        void do_read()
        {
            ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
                if (ec) {
                    self->fail();
                    return;
                }
                std::string text = beast::buffers_to_string(self->buffer_.data());
                self->buffer_.consume(self->buffer_.size());
                self->srv_.on_message(self->id_, text);
                self->do_read();
            });
        }

        void do_write()
        {
            writing_ = true;
            ws_.text(true);
            ws_.async_write(net::buffer(*queue_.front().first),
                            [self = shared_from_this()](beast::error_code ec, std::size_t) {
                                self->queue_.pop_front();
                                if (ec) {
                                    self->fail();
                                    return;
                                }
                                if (!self->queue_.empty()) self->do_write();
                                else self->writing_ = false;
                            });
        }

        void fail()
        {
            bool was_open = open_;
            close();
            queue_.clear();
            writing_ = false;
            if (was_open) srv_.on_close(id_);
        }

        websocket::stream<beast::tcp_stream> ws_;
        beast::flat_buffer buffer_;
        std::deque<std::pair<std::shared_ptr<const std::string>, bool>> queue_;
        Server& srv_;
        int id_;
        bool open_ = false;
        bool writing_ = false;
    };

    std::int64_t now_ms() const
    {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_)
            .count();
    }

    void do_accept()
    {
        acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (!acceptor_.is_open()) return;
            if (!ec) std::make_shared<Connection>(std::move(socket), *this, next_id_++)->start();
            do_accept();
        });
    }

    void on_open(const std::shared_ptr<Connection>& c)
    {
        conns_[c->id()] = c;
        session_.connect(c->id(), now_ms());
        c->send(std::make_shared<const std::string>(encode(session_.config_message(c->id())).dump()), false);
    }

    void on_message(int id, const std::string& text)
    {
        auto reply = session_.handle(id, text, now_ms());
        auto it = conns_.find(id);
        if (reply && it != conns_.end()) it->second->send(std::make_shared<const std::string>(reply->dump()), false);
    }

    void on_close(int id)
    {
        if (conns_.erase(id)) session_.disconnect(id, now_ms());
    }

    void schedule()
    {
        next_ += std::chrono::microseconds(static_cast<std::int64_t>(std::llround(session_.config().dt * 1e6)));
        timer_.expires_at(next_);
        timer_.async_wait([this](beast::error_code ec) {
            if (ec || stopped_) return;
            on_tick();
        });
    }

    void on_tick()
    {
        StateUpdate s = session_.tick(now_ms());
        auto text = std::make_shared<const std::string>(encode(s).dump());
        if (opt_.tee) *opt_.tee << *text << '\n';
        for (auto& [id, c] : conns_) c->send(text, true);
        if (opt_.max_ticks >= 0 && static_cast<std::int64_t>(session_.ticks()) >= opt_.max_ticks) {
            shutdown();
            return;
        }
        schedule();
    }

    void shutdown()
    {
        if (stopped_) return;
        stopped_ = true;
        beast::error_code ec;
        acceptor_.close(ec);
        timer_.cancel();
        signals_.cancel(ec);
        for (auto& [id, c] : conns_) c->close();
        if (opt_.tee) opt_.tee->flush();
        ioc_.stop();
    }

    net::io_context ioc_{1};
    Session session_;
    ServerOptions opt_;
    tcp::acceptor acceptor_;
    net::steady_timer timer_;
    net::signal_set signals_;
    std::map<int, std::shared_ptr<Connection>> conns_;
    std::chrono::steady_clock::time_point start_, next_;
    int next_id_ = 1;
    bool stopped_ = false;
};

}  // namespace coopga::teleop
