/**
 * @file server.h
 * @brief WebSocket event stream at /ws plus static files, on one port.
 *
 * Each client gets its own bounded drop-oldest Subscription; a slow browser
 * loses stale events rather than stalling analysis. Text frames from the
 * client are decoded as commands and handed to the command callback.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "breathtutor/events.h"

namespace breathtutor {

struct ServerOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 8080;  ///< 0 picks an ephemeral port
  std::string static_dir;     ///< empty serves a built-in placeholder page
  std::size_t client_buffer = 256;
};

/// Parses "HOST:PORT" (or ":PORT", or a bare port). Throws std::invalid_argument.
ServerOptions parse_listen(const std::string& text);

class Server {
 public:
  Server(EventHub& hub, std::function<void(const Command&)> on_command, ServerOptions options);
  ~Server();

  /// Binds and starts the network thread. Throws std::runtime_error on bind failure.
  void start();
  void stop();
  std::uint16_t port() const;
  std::size_t client_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace breathtutor
