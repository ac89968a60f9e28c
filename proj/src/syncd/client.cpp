#include <condition_variable>
#include <deque>
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

struct Client::Impl {
  Transport transport;
  asio::io_context ioc;
  std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;
  tcp::socket socket{ioc};
  std::optional<websocket::stream<tcp::socket&>> ws;
  std::thread loop;

  // Touched only on the io thread.
  std::deque<std::string> writes;
  std::array<std::uint8_t, 4> header{};
  std::string body;
  beast::flat_buffer buffer;

  std::mutex mu;
  std::condition_variable cv;
  std::deque<Message> inbox;
  bool open = true;

  void push(std::string raw) {
    std::optional<Message> m;
    try {
      m = decode_body(raw);
    } catch (const SyncError&) {
      return;
    }
    std::lock_guard lock(mu);
    inbox.push_back(std::move(*m));
    cv.notify_all();
  }

  void fail() {
    {
      std::lock_guard lock(mu);
      open = false;
      cv.notify_all();
    }
    boost::system::error_code ec;
    socket.close(ec);
  }

  void read() {
    if (ws) {
      ws->async_read(buffer, [this](beast::error_code ec, std::size_t) {
        if (ec) return fail();
        push(beast::buffers_to_string(buffer.data()));
        buffer.consume(buffer.size());
        read();
      });
      return;
    }
    asio::async_read(socket, asio::buffer(header), [this](boost::system::error_code ec, std::size_t) {
      if (ec) return fail();
      const std::uint32_t n = (std::uint32_t(header[0]) << 24) | (std::uint32_t(header[1]) << 16) |
                              (std::uint32_t(header[2]) << 8) | header[3];
      if (n > kMaxFrameBytes) return fail();
      body.resize(n);
      asio::async_read(socket, asio::buffer(body), [this](boost::system::error_code ec2, std::size_t) {
        if (ec2) return fail();
        push(std::move(body));
        body.clear();
        read();
      });
    });
  }

  void write_next() {
    auto done = [this](boost::system::error_code ec, std::size_t) {
      if (ec) return fail();
      writes.pop_front();
      if (!writes.empty()) write_next();
    };
    if (ws) ws->async_write(asio::buffer(writes.front()), done);
    else asio::async_write(socket, asio::buffer(writes.front()), done);
  }
};

Client::Client(Transport t, const std::string& host, std::uint16_t port) : impl_(std::make_unique<Impl>()) {
  Impl& m = *impl_;
  m.transport = t;
  try {
    tcp::resolver resolver(m.ioc);
    asio::connect(m.socket, resolver.resolve(host, std::to_string(port)));
    m.socket.set_option(tcp::no_delay(true));
    if (t == Transport::WebSocket) {
      m.ws.emplace(m.socket);
      m.ws->read_message_max(kMaxFrameBytes);
      m.ws->handshake(host + ":" + std::to_string(port), "/");
      m.ws->text(true);
    }
  } catch (const boost::system::system_error& e) {
    throw SyncError(SyncErrc::IoFailure, "connect " + host + ":" + std::to_string(port) + ": " + e.what());
  }
  m.work.emplace(m.ioc.get_executor());
  m.read();
  m.loop = std::thread([&m] { m.ioc.run(); });
}

Client::~Client() { close(); }

void Client::send(Message m, bool keep_seq) {
  if (!keep_seq) m.seq = ++seq_;
  else seq_ = std::max(seq_, m.seq);
  std::string body = encode_body(m);
  if (impl_->transport == Transport::Tcp) {
    const auto n = static_cast<std::uint32_t>(body.size());
    std::string framed{char(n >> 24), char(n >> 16), char(n >> 8), char(n)};
    body = framed + body;
  }
  asio::post(impl_->ioc, [m = impl_.get(), body = std::move(body)]() mutable {
    m->writes.push_back(std::move(body));
    if (m->writes.size() == 1) m->write_next();
  });
}

std::optional<Message> Client::receive(std::chrono::milliseconds timeout) {
  std::unique_lock lock(impl_->mu);
  if (!impl_->cv.wait_for(lock, timeout, [&] { return !impl_->inbox.empty() || !impl_->open; })) return std::nullopt;
  if (impl_->inbox.empty()) return std::nullopt;
  Message m = std::move(impl_->inbox.front());
  impl_->inbox.pop_front();
  history_.push_back(m);
  return m;
}

std::optional<Message> Client::wait_for(std::string_view type, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    auto m = receive(left);
    if (!m) {
      if (!connected()) return std::nullopt;
      continue;
    }
    if (m->type == type) return m;
  }
}

ClientId Client::hello(const std::string& name, Role role, std::chrono::milliseconds timeout) {
  send({"HELLO", 0, {{"name", name}, {"role", to_string(role)}}});
  const auto w = wait_for("WELCOME", timeout);
  if (!w) throw SyncError(SyncErrc::IoFailure, "no WELCOME from server");
  return w->payload.at("id").get<ClientId>();
}

bool Client::connected() const {
  std::lock_guard lock(impl_->mu);
  return impl_->open;
}

void Client::close() {
  Impl& m = *impl_;
  if (!m.loop.joinable()) return;
  asio::post(m.ioc, [&m] {
    boost::system::error_code ec;
    m.socket.shutdown(tcp::socket::shutdown_both, ec);
    m.socket.close(ec);
    m.work.reset();
  });
  m.loop.join();
  std::lock_guard lock(m.mu);
  m.open = false;
}

}  // namespace vg::syncd
