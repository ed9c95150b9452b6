#include "catbench/server.hpp"

#include <set>
#include <sys/socket.h>
#include <unistd.h>

#include "catbench/error.hpp"

namespace catbench {

namespace {

constexpr std::chrono::milliseconds kAcceptSlice{200};
constexpr std::chrono::hours kIdleLimit{24};

std::string default_label(std::uint16_t port) {
  char host[256] = {};
  if (::gethostname(host, sizeof host - 1) != 0) return "localhost:" + std::to_string(port);
  return std::string(host) + ":" + std::to_string(port);
}

// Best-effort id recovery from a payload that failed strict decoding.
wire::json salvage_message_id(const std::string &payload) {
  const auto j = wire::json::parse(payload, nullptr, false);
  if (j.is_object()) {
    const auto it = j.find("message_id");
    if (it != j.end() && (it->is_number_integer() || it->is_string())) return *it;
  }
  return nullptr;
}

}  // namespace

wire::Envelope error_reply(const wire::json &message_id, ErrorCode code, const std::string &message) {
  wire::Envelope e;
  e.message_id = message_id;
  e.kind = wire::kError;
  e.body = {{"code", std::string(to_string(code))}, {"message", message}};
  return e;
}

Server::Server(std::unique_ptr<Backend> backend, ServerOptions options) : backend_(std::move(backend)) {
  if (!backend_) throw Error(ErrorCode::invalid_argument, "server needs a backend");
  listener_ = net::listen_on(options.bind, port_);
  label_ = options.label.empty() ? default_label(port_) : options.label;
}

Server::~Server() {
  request_stop();
  reap(true);
}

int Server::init_count() const {
  std::lock_guard lock(evaluate_mutex_);
  return backend_->init_count();
}

void Server::run() {
  {
    std::lock_guard lock(evaluate_mutex_);
    backend_->initialize();
  }
  while (!stop_.load()) {
    reap(false);
    const auto ready = net::wait_readable(listener_.fd(), kAcceptSlice, &stop_);
    if (ready != net::WaitResult::ready) continue;
    const int fd = ::accept4(listener_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    auto done = std::make_shared<std::atomic<bool>>(false);
    std::lock_guard lock(connections_mutex_);
    connections_.push_back({std::thread([this, fd, done] {
                              serve_connection(net::Socket(fd));
                              done->store(true);
                            }),
                            done});
  }
  listener_.close();
  reap(true);
}

void Server::reap(bool all) {
  std::vector<Connection> finished;
  {
    std::lock_guard lock(connections_mutex_);
    for (auto it = connections_.begin(); it != connections_.end();) {
      if (all || it->done->load()) {
        finished.push_back(std::move(*it));
        it = connections_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto &c : finished)
    if (c.thread.joinable()) c.thread.join();
}

void Server::serve_connection(net::Socket socket) {
  net::FramedConnection conn(std::move(socket));
  bool greeted = false;
  std::set<std::string> seen_ids;
  try {
    for (;;) {
      std::optional<std::string> payload;
      try {
        payload = conn.receive_payload(kIdleLimit, &stop_);
      } catch (const Error &e) {
        if (e.code() == ErrorCode::protocol) conn.send(error_reply(nullptr, ErrorCode::protocol, e.what()));
        return;
      }
      if (!payload) return;
      wire::Envelope request;
      try {
        request = wire::decode_payload(*payload);
      } catch (const Error &e) {
        conn.send(error_reply(salvage_message_id(*payload), ErrorCode::protocol, e.what()));
        return;
      }
      bool close_after = false;
      if (request.kind != wire::kHello && !seen_ids.insert(request.message_id.dump()).second) {
        conn.send(error_reply(request.message_id, ErrorCode::protocol, "duplicate message_id"));
        continue;
      }
      conn.send(handle(request, greeted, close_after));
      if (close_after) return;
    }
  } catch (const std::exception &) {
    // Peer vanished mid-reply; nothing left to tell it.
  }
}

wire::Envelope Server::handle(const wire::Envelope &request, bool &greeted, bool &close_after) {
  const auto &id = request.message_id;
  if (request.protocol_version != wire::kProtocolVersion)
    return error_reply(id, ErrorCode::unsupported_version,
                       "unsupported version " + std::to_string(request.protocol_version) +
                           " (server speaks " + std::to_string(wire::kProtocolVersion) + ")");
  const auto &study = backend_->study();
  if (request.kind == wire::kHello) {
    greeted = true;
    wire::Envelope reply;
    reply.message_id = id;
    reply.kind = wire::kStudyDefinition;
    reply.body = {{"study", study.document},
                  {"server_label", label_},
                  {"backend", std::string(backend_->kind())},
                  {"init_count", init_count()}};
    return reply;
  }
  if (request.kind == wire::kShutdown) {
    request_stop();
    close_after = true;
    wire::Envelope reply;
    reply.message_id = id;
    reply.kind = wire::kShutdown;
    return reply;
  }
  if (request.kind != wire::kQuery)
    return error_reply(id, ErrorCode::protocol, "unexpected message kind '" + request.kind + "' from a client");
  if (!greeted) return error_reply(id, ErrorCode::protocol, "query before hello");
  if (!request.body.is_object() || !request.body.contains("config"))
    return error_reply(id, ErrorCode::protocol, "query body must be an object with a 'config' entry");

  try {
    const auto config = study.search_space.config_from_json(request.body["config"]);
    const auto fidelities = resolve_fidelities(study, request.body.value("fidelities", wire::json()));
    QueryResult result;
    {
      std::lock_guard lock(evaluate_mutex_);
      result = backend_->evaluate(config, fidelities);
    }
    const auto n = evaluations_.fetch_add(1) + 1;
    result.evaluation_id = label_ + "-" + std::to_string(n);
    result.server_label = label_;
    wire::Envelope reply;
    reply.message_id = id;
    reply.kind = wire::kResult;
    reply.body = result_to_json(result);
    return reply;
  } catch (const InvalidConfigError &e) {
    wire::Envelope reply;
    reply.message_id = id;
    reply.kind = wire::kInvalidConfig;
    reply.body = {{"message", e.what()}, {"violated", e.violated()}};
    return reply;
  } catch (const Error &e) {
    return error_reply(id, e.code(), e.what());
  } catch (const std::exception &e) {
    return error_reply(id, ErrorCode::internal, e.what());
  }
}

}  // namespace catbench
