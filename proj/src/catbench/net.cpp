#include "catbench/net.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "catbench/error.hpp"

namespace catbench::net {

namespace {

[[noreturn]] void transport(const std::string &what) {
  throw TransportError(what + (errno ? std::string(": ") + std::strerror(errno) : std::string()));
}

sockaddr_in resolve(const Address &a) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(a.port);
  const std::string host = a.host.empty() || a.host == "localhost" ? "127.0.0.1" : a.host;
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo *res = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res) {
    errno = 0;
    transport("cannot resolve host '" + host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in *>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

}  // namespace

Address parse_address(const std::string &text) {
  Address a;
  const auto colon = text.rfind(':');
  std::string port = text;
  if (colon != std::string::npos) {
    a.host = text.substr(0, colon);
    port = text.substr(colon + 1);
  } else {
    a.host = "127.0.0.1";
  }
  char *end = nullptr;
  errno = 0;
  const long p = std::strtol(port.c_str(), &end, 10);
  if (port.empty() || *end != '\0' || p < 0 || p > 65535 || errno)
    throw Error(ErrorCode::invalid_argument, "invalid address '" + text + "' (expected host:port)");
  a.port = static_cast<std::uint16_t>(p);
  if (a.host.empty()) a.host = "127.0.0.1";
  return a;
}

std::string to_string(const Address &a) { return a.host + ":" + std::to_string(a.port); }

Socket &Socket::operator=(Socket &&other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.release();
  }
  return *this;
}

int Socket::release() noexcept {
  const int fd = fd_;
  fd_ = -1;
  return fd;
}

void Socket::close() noexcept {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

Socket listen_on(const Address &address, std::uint16_t &bound_port) {
  errno = 0;
  const auto addr = resolve(address);
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) transport("socket");
  const int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(s.fd(), reinterpret_cast<const sockaddr *>(&addr), sizeof addr) != 0)
    transport("cannot bind " + to_string(address));
  if (::listen(s.fd(), 64) != 0) transport("listen on " + to_string(address));
  sockaddr_in actual{};
  socklen_t len = sizeof actual;
  ::getsockname(s.fd(), reinterpret_cast<sockaddr *>(&actual), &len);
  bound_port = ntohs(actual.sin_port);
  return s;
}

Socket connect_to(const Address &address, std::chrono::milliseconds timeout) {
  errno = 0;
  const auto addr = resolve(address);
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) transport("socket");
  const int flags = ::fcntl(s.fd(), F_GETFL, 0);
  ::fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
  if (::connect(s.fd(), reinterpret_cast<const sockaddr *>(&addr), sizeof addr) != 0) {
    if (errno != EINPROGRESS) transport("cannot connect to " + to_string(address));
    pollfd p{s.fd(), POLLOUT, 0};
    const int r = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (r == 0) throw Error(ErrorCode::timeout, "connect to " + to_string(address) + " timed out");
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (r < 0 || err != 0) {
      errno = err;
      transport("cannot connect to " + to_string(address));
    }
  }
  ::fcntl(s.fd(), F_SETFL, flags);
  const int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return s;
}

WaitResult wait_readable(int fd, std::chrono::milliseconds timeout, const std::atomic<bool> *stop) {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + timeout;
  for (;;) {
    if (stop && stop->load()) return WaitResult::stopped;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
    if (left.count() <= 0) return WaitResult::timeout;
    const int slice = static_cast<int>(std::min<std::int64_t>(left.count(), stop ? 100 : left.count()));
    pollfd p{fd, POLLIN, 0};
    const int r = ::poll(&p, 1, slice);
    if (r > 0) return WaitResult::ready;
    if (r < 0 && errno != EINTR) transport("poll");
  }
}

void send_all(int fd, std::string_view bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const auto n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      transport("send");
    }
    sent += static_cast<std::size_t>(n);
  }
}

void FramedConnection::send(const wire::Envelope &e) { send_all(socket_.fd(), wire::encode_frame(e)); }

void FramedConnection::send_raw(std::string_view bytes) { send_all(socket_.fd(), bytes); }

std::optional<std::string> FramedConnection::receive_payload(std::chrono::milliseconds timeout,
                                                             const std::atomic<bool> *stop) {
  char buf[65536];
  for (;;) {
    if (auto payload = decoder_.next()) return payload;
    switch (wait_readable(socket_.fd(), timeout, stop)) {
      case WaitResult::stopped: return std::nullopt;
      case WaitResult::timeout: throw Error(ErrorCode::timeout, "no reply within " + std::to_string(timeout.count()) + " ms");
      case WaitResult::ready: break;
    }
    const auto n = ::recv(socket_.fd(), buf, sizeof buf, 0);
    if (n == 0) {
      if (decoder_.buffered() > 0) {
        errno = 0;
        transport("connection closed mid-frame");
      }
      return std::nullopt;
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      transport("connection reset");
    }
    decoder_.feed(std::string_view(buf, static_cast<std::size_t>(n)));
  }
}

}  // namespace catbench::net
