#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <future>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "voxelglass/syncd.hpp"

namespace vg::syncd {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using Body = std::shared_ptr<const std::string>;

void ServerConfig::apply_environment() {
  if (const char* bind = std::getenv("VOXELGLASS_BIND"); bind && *bind) bind_address = bind;
}

namespace {

// Slow consumers are dropped rather than buffered without bound.
constexpr std::size_t kMaxQueuedWrites = 4096;

double seconds_now() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  using MessageFn = std::function<void(ClientId, std::string)>;
  using CloseFn = std::function<void(ClientId)>;

  virtual ~Connection() = default;
  virtual void start() = 0;
  virtual void deliver(Body body) = 0;
  virtual void shutdown() = 0;

  ClientId id = 0;
  double last_seen = 0;
  MessageFn on_message;
  CloseFn on_close;

 protected:
  void closed() {
    if (done_) return;
    done_ = true;
    if (on_close) on_close(id);
  }
  bool done_ = false;
  std::deque<Body> queue_;
};

class TcpConnection final : public Connection {
 public:
  explicit TcpConnection(tcp::socket s) : socket_(std::move(s)) {}

  void start() override { read_header(); }

  void deliver(Body body) override {
    if (done_) return;
    if (queue_.size() >= kMaxQueuedWrites) return shutdown();
    const auto n = static_cast<std::uint32_t>(body->size());
    auto framed = std::make_shared<std::string>();
    framed->reserve(4 + body->size());
    framed->push_back(char(n >> 24));
    framed->push_back(char(n >> 16));
    framed->push_back(char(n >> 8));
    framed->push_back(char(n));
    framed->append(*body);
    queue_.push_back(std::move(framed));
    if (queue_.size() == 1) write_next();
  }

  void shutdown() override {
    boost::system::error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
    socket_.close(ec);
    closed();
  }

 private:
  void read_header() {
    asio::async_read(socket_, asio::buffer(header_), [self = shared_from_this(), this](auto ec, std::size_t) {
      if (ec) return shutdown();
      const std::uint32_t n = (std::uint32_t(header_[0]) << 24) | (std::uint32_t(header_[1]) << 16) |
                              (std::uint32_t(header_[2]) << 8) | header_[3];
      // The stream cannot be resynchronised past an oversized frame.
      if (n > kMaxFrameBytes) return shutdown();
      body_.resize(n);
      asio::async_read(socket_, asio::buffer(body_), [self, this](auto ec2, std::size_t) {
        if (ec2) return shutdown();
        on_message(id, std::move(body_));
        body_.clear();
        if (!done_) read_header();
      });
    });
  }

  void write_next() {
    asio::async_write(socket_, asio::buffer(*queue_.front()), [self = shared_from_this(), this](auto ec, std::size_t) {
      if (ec) return shutdown();
      queue_.pop_front();
      if (!queue_.empty()) write_next();
    });
  }

  tcp::socket socket_;
  std::array<std::uint8_t, 4> header_{};
  std::string body_;
};

class WsConnection final : public Connection {
 public:
  explicit WsConnection(tcp::socket s) : ws_(std::move(s)) {}

  void start() override {
    ws_.read_message_max(kMaxFrameBytes);
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this(), this](beast::error_code ec) {
      if (ec) return shutdown();
      accepted_ = true;
      read();
      if (!queue_.empty()) write_next();
    });
  }

  void deliver(Body body) override {
    if (done_) return;
    if (queue_.size() >= kMaxQueuedWrites) return shutdown();
    queue_.push_back(std::move(body));
    if (accepted_ && queue_.size() == 1) write_next();
  }

  void shutdown() override {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
    beast::get_lowest_layer(ws_).close();
    closed();
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this(), this](beast::error_code ec, std::size_t) {
      if (ec) return shutdown();
      std::string body = beast::buffers_to_string(buffer_.data());
      buffer_.consume(buffer_.size());
      on_message(id, std::move(body));
      if (!done_) read();
    });
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(asio::buffer(*queue_.front()), [self = shared_from_this(), this](beast::error_code ec, std::size_t) {
      if (ec) return shutdown();
      queue_.pop_front();
      if (!queue_.empty()) write_next();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  bool accepted_ = false;
};

}  // namespace

struct Server::Impl {
  explicit Impl(ServerConfig c)
      : cfg(std::move(c)), tcp_acceptor(ioc), ws_acceptor(ioc), timer(ioc),
        render_pool(std::size_t(std::max(1, cfg.render_threads))) {}

  ServerConfig cfg;
  asio::io_context ioc;
  tcp::acceptor tcp_acceptor;
  tcp::acceptor ws_acceptor;
  asio::steady_timer timer;
  asio::thread_pool render_pool;
  std::thread loop;

  // Owned by the event loop thread.
  SessionState state;
  std::map<ClientId, std::shared_ptr<Connection>> conns;
  FramePacer pacer;
  bool stopping = false;
  std::uint16_t tcp_port = 0, ws_port = 0;

  std::mutex life_mu;
  std::condition_variable life_cv;
  bool running = false;

  void bind(tcp::acceptor& a, std::uint16_t port, const char* what) {
    boost::system::error_code ec;
    const auto addr = asio::ip::make_address(cfg.bind_address, ec);
    if (ec) throw SyncError(SyncErrc::BindFailure, "bad bind address '" + cfg.bind_address + "'");
    const tcp::endpoint ep(addr, port);
    a.open(ep.protocol(), ec);
    if (!ec) a.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) a.bind(ep, ec);
    if (!ec) a.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) {
      throw SyncError(SyncErrc::BindFailure, std::string(what) + " " + cfg.bind_address + ":" +
                                                 std::to_string(port) + ": " + ec.message());
    }
  }

  void accept(tcp::acceptor& a, bool websocket) {
    a.async_accept([this, &a, websocket](boost::system::error_code ec, tcp::socket s) {
      if (ec || stopping) return;
      s.set_option(tcp::no_delay(true), ec);
      std::shared_ptr<Connection> c;
      if (websocket) c = std::make_shared<WsConnection>(std::move(s));
      else c = std::make_shared<TcpConnection>(std::move(s));
      c->id = allocate_client_id(state);
      c->last_seen = seconds_now();
      c->on_message = [this](ClientId id, std::string body) { on_message(id, std::move(body)); };
      c->on_close = [this](ClientId id) { on_close(id); };
      conns[c->id] = c;
      c->start();
      accept(a, websocket);
    });
  }

  void send(ClientId id, const Body& body) {
    if (const auto it = conns.find(id); it != conns.end()) it->second->deliver(body);
  }

  void dispatch(ClientId sender, const std::vector<Outbound>& out) {
    for (const auto& o : out) {
      const Body body = std::make_shared<const std::string>(encode_body(o.msg));
      if (o.to == Outbound::To::Sender) {
        send(sender, body);
        continue;
      }
      std::vector<ClientId> ids;
      for (const auto& [id, info] : state.clients) ids.push_back(id);
      for (ClientId id : ids) send(id, body);
    }
  }

  void on_message(ClientId id, std::string body) {
    const double now = seconds_now();
    if (const auto it = conns.find(id); it != conns.end()) it->second->last_seen = now;
    Message msg;
    try {
      msg = decode_body(body);
    } catch (const SyncError& e) {
      const Message nack{"NACK", state.seq,
                         {{"reason", std::string(to_string(e.errc())) + ": " + e.what()}, {"code", to_string(e.errc())}}};
      send(id, std::make_shared<const std::string>(encode_body(nack)));
      return;
    }
    const HandleResult r = handle_message(state, id, msg, cfg.marker);
    if (auto it = state.clients.find(id); it != state.clients.end()) it->second.last_seen = now;
    if (msg.type == "SUBSCRIBE_FRAMES" && !r.rejected) pacer.forget(id);
    dispatch(id, r.out);
    if (r.mutated || msg.type == "SUBSCRIBE_FRAMES") pump_frames();
  }

  void on_close(ClientId id) {
    if (conns.erase(id) == 0) return;
    pacer.forget(id);
    if (stopping) return;
    dispatch(id, remove_client(state, id));
  }

  void tick() {
    timer.expires_after(std::chrono::duration_cast<asio::steady_timer::duration>(
        std::chrono::duration<double>(cfg.tick_s)));
    timer.async_wait([this](boost::system::error_code ec) {
      if (ec || stopping) return;
      const double now = seconds_now();
      std::vector<std::shared_ptr<Connection>> idle;
      for (const auto& [id, c] : conns) {
        if (now - c->last_seen > cfg.heartbeat_timeout_s) idle.push_back(c);
      }
      for (auto& c : idle) c->shutdown();
      pump_frames();
      tick();
    });
  }

  void pump_frames() {
    if (!cfg.frames || stopping) return;
    const double now = seconds_now();
    std::shared_ptr<const SessionState> snap;
    for (const auto& [id, info] : state.clients) {
      if (!info.frames || !pacer.due(id, *info.frames, state.seq, now)) continue;
      pacer.begin(id, state.seq, now);
      if (!snap) snap = std::make_shared<const SessionState>(state);
      asio::post(render_pool, [this, snap, id = id] {
        std::shared_ptr<const std::string> body;
        try {
          body = std::make_shared<const std::string>(encode_body(stream_frame(*snap, *cfg.frames, id)));
        } catch (const Error& e) {
          body = std::make_shared<const std::string>(encode_body(
              {"NACK", snap->seq, {{"reason", e.code() + ": " + e.what()}, {"code", e.code()}, {"ref_type", "FRAME"}}}));
        }
        asio::post(ioc, [this, id, body] {
          pacer.finish(id);
          send(id, body);
        });
      });
    }
  }

  void shutdown_all() {
    stopping = true;
    boost::system::error_code ec;
    tcp_acceptor.close(ec);
    ws_acceptor.close(ec);
    timer.cancel();
    auto all = conns;
    for (auto& [id, c] : all) c->shutdown();
    conns.clear();
  }
};

Server::Server(ServerConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

Server::~Server() { stop(); }

void Server::start() {
  Impl& m = *impl_;
  m.bind(m.tcp_acceptor, m.cfg.tcp_port, "tcp");
  m.bind(m.ws_acceptor, m.cfg.ws_port, "websocket");
  m.tcp_port = m.tcp_acceptor.local_endpoint().port();
  m.ws_port = m.ws_acceptor.local_endpoint().port();
  m.accept(m.tcp_acceptor, false);
  m.accept(m.ws_acceptor, true);
  m.tick();
  {
    std::lock_guard lock(m.life_mu);
    m.running = true;
  }
  m.loop = std::thread([&m] {
    m.ioc.run();
    std::lock_guard lock(m.life_mu);
    m.running = false;
    m.life_cv.notify_all();
  });
}

void Server::wait() {
  std::unique_lock lock(impl_->life_mu);
  impl_->life_cv.wait(lock, [&] { return !impl_->running; });
}

void Server::stop() {
  Impl& m = *impl_;
  if (!m.loop.joinable()) return;
  if (!m.ioc.stopped()) {
    std::promise<void> done;
    auto fut = done.get_future();
    asio::post(m.ioc, [&m, &done] {
      m.shutdown_all();
      done.set_value();
    });
    fut.wait_for(std::chrono::seconds(5));
  }
  // Let in-flight renders finish, then drain their completion handlers.
  m.render_pool.join();
  m.ioc.stop();
  if (m.loop.get_id() != std::this_thread::get_id()) m.loop.join();
}

std::uint16_t Server::tcp_port() const { return impl_->tcp_port; }
std::uint16_t Server::ws_port() const { return impl_->ws_port; }

SessionState Server::snapshot() const {
  Impl& m = *impl_;
  {
    std::lock_guard lock(m.life_mu);
    if (!m.running) return m.state;
  }
  std::promise<SessionState> p;
  auto fut = p.get_future();
  asio::post(m.ioc, [&m, &p] { p.set_value(m.state); });
  return fut.get();
}

}  // namespace vg::syncd
