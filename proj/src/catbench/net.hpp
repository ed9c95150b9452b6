#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <string>

#include "catbench/frame.hpp"

namespace catbench::net {

struct Address {
  std::string host;
  std::uint16_t port = 0;
};

// "host:port"; a bare port means 127.0.0.1. Throws invalid_argument.
Address parse_address(const std::string &text);
std::string to_string(const Address &a);

// Owning POSIX socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket &&other) noexcept : fd_(other.release()) {}
  Socket &operator=(Socket &&other) noexcept;
  Socket(const Socket &) = delete;
  Socket &operator=(const Socket &) = delete;
  ~Socket() { close(); }

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  int release() noexcept;
  void close() noexcept;

 private:
  int fd_ = -1;
};

// Throws TransportError when the address cannot be bound.
Socket listen_on(const Address &address, std::uint16_t &bound_port);
// Throws TransportError on failure and timeout errors past the deadline.
Socket connect_to(const Address &address, std::chrono::milliseconds timeout);

enum class WaitResult { ready, timeout, stopped };

// Waits for readability in slices so a stop flag can interrupt the wait.
WaitResult wait_readable(int fd, std::chrono::milliseconds timeout, const std::atomic<bool> *stop);

void send_all(int fd, std::string_view bytes);

// Frame-level I/O over a connected socket.
class FramedConnection {
 public:
  explicit FramedConnection(Socket socket) : socket_(std::move(socket)) {}

  void send(const wire::Envelope &e);
  void send_raw(std::string_view bytes);
  // Returns nullopt on orderly close (or stop). Throws TransportError on
  // resets, timeout on deadline expiry, protocol on oversized frames.
  std::optional<std::string> receive_payload(std::chrono::milliseconds timeout,
                                             const std::atomic<bool> *stop = nullptr);
  int fd() const noexcept { return socket_.fd(); }
  void close() noexcept { socket_.close(); }

 private:
  Socket socket_;
  wire::FrameDecoder decoder_;
};

}  // namespace catbench::net
