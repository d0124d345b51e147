/**
 * @file server.cpp
 * @brief Beast-based HTTP + WebSocket front end on a single io_context thread.
 */

#include "breathtutor/server.h"

#include <boost/asio.hpp>
#include <boost/beast.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace breathtutor {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;

ServerOptions parse_listen(const std::string& text) {
  ServerOptions o;
  std::string port = text;
  const auto colon = text.rfind(':');
  if (colon != std::string::npos) {
    if (colon > 0) o.address = text.substr(0, colon);
    port = text.substr(colon + 1);
  }
  int value = -1;
  try {
    std::size_t used = 0;
    value = std::stoi(port, &used);
    if (used != port.size()) value = -1;
  } catch (const std::exception&) {
  }
  if (value < 0 || value > 65535) throw std::invalid_argument("listen address must be HOST:PORT, got '" + text + "'");
  o.port = static_cast<std::uint16_t>(value);
  return o;
}

namespace {

constexpr std::string_view kPlaceholderPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>breath tutor</title></head>
<body><h1>breath tutor</h1><p>Event stream: <code>/ws</code></p><pre id="log"></pre>
<script>
const ws = new WebSocket(`ws://${location.host}/ws`);
const log = document.getElementById('log');
ws.onmessage = (m) => { log.textContent = m.data + '\n' + log.textContent.slice(0, 4000); };
</script></body></html>
)";

std::string_view mime_type(const std::string& ext) {
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".wasm") return "application/wasm";
  if (ext == ".ico") return "image/x-icon";
  return "application/octet-stream";
}

class WsSession;

struct Shared {
  Shared(EventHub& h, std::function<void(const Command&)> cb, ServerOptions o)
      : hub(h), on_command(std::move(cb)), options(std::move(o)) {}

  EventHub& hub;
  std::function<void(const Command&)> on_command;
  ServerOptions options;
  std::mutex mu;
  std::size_t clients = 0;
  std::vector<std::weak_ptr<Subscription>> subs;
  std::vector<std::weak_ptr<WsSession>> sessions;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, std::shared_ptr<Shared> shared)
      : ws_(std::move(socket)), shared_(std::move(shared)) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.text(true);
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  auto executor() { return ws_.get_executor(); }

  /// Drops the connection outright. Only safe once the io_context has stopped.
  void abort() {
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).socket().close(ignored);
  }

  /// Starts the closing handshake once any write in flight has finished.
  void shutdown() {
    if (closed_ || stopping_) return;
    stopping_ = true;
    if (!writing_) start_close();
  }

 private:
  void start_close() {
    ws_.async_close(websocket::close_code::going_away,
                    [self = shared_from_this()](beast::error_code) { self->close(); });
  }

  void on_accept(beast::error_code ec) {
    if (ec) return;
    sub_ = shared_->hub.subscribe(shared_->options.client_buffer);
    {
      std::lock_guard lock(shared_->mu);
      ++shared_->clients;
      shared_->subs.push_back(sub_);
      std::erase_if(shared_->sessions, [](const auto& w) { return w.expired(); });
      shared_->sessions.push_back(weak_from_this());
    }
    std::weak_ptr<WsSession> weak = shared_from_this();
    auto executor = ws_.get_executor();
    sub_->set_notify([weak, executor] {
      asio::post(executor, [weak] {
        if (auto self = weak.lock()) self->pump();
      });
    });
    pump();
    do_read();
  }

  void do_read() {
    ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) return close();
    const std::string text = beast::buffers_to_string(in_.data());
    in_.consume(in_.size());
    try {
      shared_->on_command(decode_command(text));
    } catch (const std::invalid_argument& e) {
      nlohmann::json j = {{"type", "rejected"}, {"cmd", ""}, {"reason", e.what()}};
      sub_->push(j.dump());
    }
    do_read();
  }

  void pump() {
    if (writing_ || closed_ || stopping_) return;
    auto next = sub_->pop(0);
    if (!next) return;
    writing_ = true;
    out_ = std::move(*next);
    ws_.async_write(asio::buffer(out_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) return self->close();
      if (self->stopping_) return self->start_close();
      self->pump();
    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    if (sub_) {
      sub_->set_notify(nullptr);
      sub_->close();
      shared_->hub.unsubscribe(sub_);
      std::lock_guard lock(shared_->mu);
      --shared_->clients;
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<Shared> shared_;
  std::shared_ptr<Subscription> sub_;
  beast::flat_buffer in_;
  std::string out_;
  bool writing_ = false;
  bool stopping_ = false;
  bool closed_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, std::shared_ptr<Shared> shared)
      : stream_(std::move(socket)), shared_(std::move(shared)) {}

  void run() { do_read(); }

 private:
  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) return;
    if (websocket::is_upgrade(req_)) {
      if (req_.target() == "/ws") {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), shared_)->run(std::move(req_));
        return;
      }
      return reply(http::status::not_found, "text/plain", "no websocket here; use /ws\n");
    }
    if (req_.method() != http::verb::get && req_.method() != http::verb::head) {
      return reply(http::status::method_not_allowed, "text/plain", "GET only\n");
    }
    serve_file();
  }

  void serve_file() {
    std::string target(req_.target());
    if (const auto q = target.find('?'); q != std::string::npos) target.resize(q);
    if (target.empty() || target.back() == '/') target += "index.html";
    if (target.find("..") != std::string::npos || target.front() != '/') {
      return reply(http::status::bad_request, "text/plain", "bad path\n");
    }
    const std::string& root = shared_->options.static_dir;
    if (root.empty()) {
      if (target == "/index.html") return reply(http::status::ok, "text/html; charset=utf-8", std::string(kPlaceholderPage));
      return reply(http::status::not_found, "text/plain", "not found\n");
    }
    const std::filesystem::path path = std::filesystem::path(root) / target.substr(1);
    std::ifstream in(path, std::ios::binary);
    if (!in || std::filesystem::is_directory(path)) return reply(http::status::not_found, "text/plain", "not found\n");
    std::ostringstream body;
    body << in.rdbuf();
    reply(http::status::ok, mime_type(path.extension().string()), body.str());
  }

  void reply(http::status status, std::string_view type, std::string body) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::server, "breathtutor");
    res->set(http::field::content_type, beast::string_view(type.data(), type.size()));
    res->keep_alive(req_.keep_alive());
    const std::size_t size = body.size();
    const bool head = req_.method() == http::verb::head;
    res->body() = head ? std::string() : std::move(body);
    res->prepare_payload();
    if (head) res->content_length(size);
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!res->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->do_read();
    });
  }

  beast::tcp_stream stream_;
  std::shared_ptr<Shared> shared_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

}  // namespace

struct Server::Impl {
  asio::io_context io{1};
  tcp::acceptor acceptor{io};
  std::shared_ptr<Shared> shared;
  std::thread thread;
  std::uint16_t bound_port = 0;

  void do_accept() {
    acceptor.async_accept(asio::make_strand(io), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        if (ec == asio::error::operation_aborted) return;
      } else {
        std::make_shared<HttpSession>(std::move(socket), shared)->run();
      }
      do_accept();
    });
  }
};

Server::Server(EventHub& hub, std::function<void(const Command&)> on_command, ServerOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->shared = std::make_shared<Shared>(hub, std::move(on_command), std::move(options));
}

Server::~Server() { stop(); }

void Server::start() {
  const auto& o = impl_->shared->options;
  beast::error_code ec;
  const auto address = asio::ip::make_address(o.address, ec);
  if (ec) throw std::runtime_error("bad listen address '" + o.address + "': " + ec.message());
  const tcp::endpoint endpoint(address, o.port);
  auto& acc = impl_->acceptor;
  acc.open(endpoint.protocol(), ec);
  if (!ec) acc.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) acc.bind(endpoint, ec);
  if (!ec) acc.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) throw std::runtime_error("cannot listen on " + o.address + ":" + std::to_string(o.port) + ": " + ec.message());
  impl_->bound_port = acc.local_endpoint().port();
  impl_->do_accept();
  impl_->thread = std::thread([this] { impl_->io.run(); });
}

void Server::stop() {
  if (!impl_->thread.joinable()) return;
  asio::post(impl_->io, [this] {
    beast::error_code ignored;
    impl_->acceptor.close(ignored);
    std::vector<std::shared_ptr<WsSession>> live;
    {
      std::lock_guard lock(impl_->shared->mu);
      for (const auto& weak : impl_->shared->sessions) {
        if (auto s = weak.lock()) live.push_back(std::move(s));
      }
    }
    // Each session runs on its own strand.
    for (auto& s : live) asio::post(s->executor(), [s] { s->shutdown(); });
  });
  // Give clients a moment to answer the close frame; a silent one is cut off.
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(200);
  while (client_count() > 0 && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  impl_->io.stop();
  impl_->thread.join();
  std::lock_guard lock(impl_->shared->mu);
  // Clients still waiting on the handshake see EOF rather than a half-open socket.
  for (const auto& weak : impl_->shared->sessions) {
    if (auto s = weak.lock()) s->abort();
  }
  impl_->shared->sessions.clear();
  // Subscriptions outlive the io_context inside the hub; detach them so no one posts to it.
  for (const auto& weak : impl_->shared->subs) {
    if (auto sub = weak.lock()) {
      sub->set_notify(nullptr);
      sub->close();
      impl_->shared->hub.unsubscribe(sub);
    }
  }
  impl_->shared->subs.clear();
}

std::uint16_t Server::port() const { return impl_->bound_port; }

std::size_t Server::client_count() const {
  std::lock_guard lock(impl_->shared->mu);
  return impl_->shared->clients;
}

}  // namespace breathtutor
