#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "catbench/backend.hpp"
#include "catbench/net.hpp"

namespace catbench {

struct ClientOptions {
  std::chrono::milliseconds timeout{600'000};
  std::chrono::milliseconds connect_timeout{10'000};
};

// One connection to a benchmark server. Not safe for concurrent use.
class Client {
 public:
  // Connects and performs the hello exchange. Throws TransportError,
  // timeout, or unsupported_version.
  explicit Client(const net::Address &address, ClientOptions options = {});

  const StudyDefinition &study() const noexcept { return study_; }
  const std::string &server_label() const noexcept { return server_label_; }
  const std::string &backend_kind() const noexcept { return backend_kind_; }
  // Backend initializations the server reported in its study definition.
  int server_init_count() const noexcept { return init_count_; }
  const net::Address &address() const noexcept { return address_; }

  // Blocks for the reply. invalid_config replies raise InvalidConfigError;
  // a dropped connection raises TransportError with zero retries.
  QueryResult query(const space::Configuration &config, const FidelitySettings &fidelities);
  QueryResult query(const json &config, const json &fidelities);

  // Asks the server to stop and waits for its acknowledgement.
  void shutdown_server();

  // Sends one envelope and returns the raw reply (for protocol tests).
  wire::Envelope exchange(const wire::Envelope &request);

 private:
  std::int64_t next_id() { return next_id_++; }

  net::Address address_;
  ClientOptions options_;
  net::FramedConnection conn_;
  StudyDefinition study_;
  std::string server_label_;
  std::string backend_kind_;
  int init_count_ = 0;
  std::int64_t next_id_ = 1;
};

// Raises the error an error reply describes.
[[noreturn]] void throw_error_reply(const wire::Envelope &reply);

// Round-robin over several servers of the same study, one request in flight
// per server.
class Dispatcher {
 public:
  // Throws invalid_argument when the servers disagree on the study id.
  Dispatcher(const std::vector<net::Address> &addresses, ClientOptions options = {});

  const StudyDefinition &study() const { return clients_.front()->study(); }
  std::size_t size() const noexcept { return clients_.size(); }
  std::vector<std::string> server_labels() const;

  QueryResult query(const space::Configuration &config, const FidelitySettings &fidelities);

 private:
  std::vector<std::unique_ptr<Client>> clients_;
  std::vector<std::unique_ptr<std::mutex>> locks_;
  std::mutex cursor_mutex_;
  std::size_t cursor_ = 0;
};

// Comma-separated host:port list; empty entries are skipped.
std::vector<net::Address> parse_address_list(const std::string &text);

// Optimizer-facing evaluation interface: a local backend or remote servers.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual const StudyDefinition &study() const = 0;
  virtual QueryResult evaluate(const space::Configuration &config, const FidelitySettings &fidelities) = 0;
};

class LocalEvaluator : public Evaluator {
 public:
  LocalEvaluator(Backend &backend, std::string label = "local") : backend_(backend), label_(std::move(label)) {}
  const StudyDefinition &study() const override { return backend_.study(); }
  QueryResult evaluate(const space::Configuration &config, const FidelitySettings &fidelities) override;

 private:
  Backend &backend_;
  std::string label_;
  std::uint64_t count_ = 0;
};

class RemoteEvaluator : public Evaluator {
 public:
  explicit RemoteEvaluator(Dispatcher &dispatcher) : dispatcher_(dispatcher) {}
  const StudyDefinition &study() const override { return dispatcher_.study(); }
  QueryResult evaluate(const space::Configuration &config, const FidelitySettings &fidelities) override {
    return dispatcher_.query(config, fidelities);
  }

 private:
  Dispatcher &dispatcher_;
};

}  // namespace catbench
