#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "catbench/backend.hpp"
#include "catbench/error.hpp"
#include "catbench/net.hpp"

namespace catbench {

struct ServerOptions {
  net::Address bind{"127.0.0.1", 0};  // port 0 picks a free port
  std::string label;                   // defaults to hostname:port
};

// Serves one backend. Connections are handled concurrently; evaluations are
// mutually exclusive. Replies on a connection follow request order.
class Server {
 public:
  // Binds immediately; throws TransportError when the address is unavailable.
  Server(std::unique_ptr<Backend> backend, ServerOptions options);
  ~Server();
  Server(const Server &) = delete;
  Server &operator=(const Server &) = delete;

  std::uint16_t port() const noexcept { return port_; }
  const std::string &label() const noexcept { return label_; }
  const Backend &backend() const noexcept { return *backend_; }
  int init_count() const;

  // Initializes the backend, then accepts connections until a shutdown
  // message or request_stop(). Safe to call request_stop() from any thread
  // or signal handler.
  void run();
  void request_stop() noexcept { stop_.store(true); }
  bool stopping() const noexcept { return stop_.load(); }

  // Evaluations served so far.
  std::uint64_t evaluations() const noexcept { return evaluations_.load(); }

 private:
  struct Connection {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  void serve_connection(net::Socket socket);
  wire::Envelope handle(const wire::Envelope &request, bool &greeted, bool &close_after);
  void reap(bool all);

  std::unique_ptr<Backend> backend_;
  net::Socket listener_;
  std::uint16_t port_ = 0;
  std::string label_;
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> evaluations_{0};
  mutable std::mutex evaluate_mutex_;
  std::mutex connections_mutex_;
  std::vector<Connection> connections_;
};

// Error reply body: {"code": <ErrorCode name>, "message": text}.
wire::Envelope error_reply(const wire::json &message_id, ErrorCode code, const std::string &message);

}  // namespace catbench
