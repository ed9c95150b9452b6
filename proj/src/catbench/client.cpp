#include "catbench/client.hpp"

#include "catbench/error.hpp"

namespace catbench {

namespace {

net::FramedConnection open(const net::Address &address, const ClientOptions &options) {
  return net::FramedConnection(net::connect_to(address, options.connect_timeout));
}

}  // namespace

void throw_error_reply(const wire::Envelope &reply) {
  const auto code = parse_error_code(reply.body.value("code", std::string("internal")));
  const auto message = reply.body.value("message", std::string("server error"));
  if (code == ErrorCode::transport) throw TransportError(message);
  throw Error(code, message);
}

Client::Client(const net::Address &address, ClientOptions options)
    : address_(address), options_(options), conn_(open(address, options)) {
  wire::Envelope hello;
  hello.message_id = 0;
  hello.kind = wire::kHello;
  const auto reply = exchange(hello);
  if (reply.kind == wire::kError) throw_error_reply(reply);
  if (reply.kind != wire::kStudyDefinition)
    throw Error(ErrorCode::protocol, "expected study_definition, got '" + reply.kind + "'");
  try {
    study_ = parse_study(reply.body.at("study"));
    server_label_ = reply.body.value("server_label", net::to_string(address));
    backend_kind_ = reply.body.value("backend", std::string());
    init_count_ = reply.body.value("init_count", 0);
  } catch (const wire::json::exception &e) {
    throw Error(ErrorCode::protocol, std::string("malformed study_definition: ") + e.what());
  }
}

wire::Envelope Client::exchange(const wire::Envelope &request) {
  conn_.send(request);
  auto payload = conn_.receive_payload(options_.timeout);
  if (!payload) throw TransportError("connection to " + net::to_string(address_) + " closed by the server", 0);
  auto reply = wire::decode_payload(*payload);
  if (reply.message_id != request.message_id && !reply.message_id.is_null())
    throw Error(ErrorCode::protocol, "reply message_id " + reply.message_id.dump() + " does not match request " +
                                         request.message_id.dump());
  return reply;
}

QueryResult Client::query(const space::Configuration &config, const FidelitySettings &fidelities) {
  return query(study_.search_space.config_to_json(config), fidelities_to_json(study_, fidelities));
}

QueryResult Client::query(const json &config, const json &fidelities) {
  wire::Envelope request;
  request.message_id = next_id();
  request.kind = wire::kQuery;
  request.body = {{"config", config}, {"fidelities", fidelities}};
  const auto reply = exchange(request);
  if (reply.kind == wire::kResult) return result_from_json(reply.body);
  if (reply.kind == wire::kInvalidConfig)
    throw InvalidConfigError(reply.body.value("message", std::string("invalid configuration")),
                             reply.body.value("violated", std::vector<int>{}));
  if (reply.kind == wire::kError) throw_error_reply(reply);
  throw Error(ErrorCode::protocol, "unexpected reply kind '" + reply.kind + "'");
}

void Client::shutdown_server() {
  wire::Envelope request;
  request.message_id = next_id();
  request.kind = wire::kShutdown;
  const auto reply = exchange(request);
  if (reply.kind == wire::kError) throw_error_reply(reply);
}

std::vector<net::Address> parse_address_list(const std::string &text) {
  std::vector<net::Address> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    auto item = text.substr(start, end - start);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(net::parse_address(item));
    start = end + 1;
  }
  return out;
}

Dispatcher::Dispatcher(const std::vector<net::Address> &addresses, ClientOptions options) {
  if (addresses.empty()) throw Error(ErrorCode::invalid_argument, "no server addresses given");
  for (const auto &a : addresses) {
    clients_.push_back(std::make_unique<Client>(a, options));
    locks_.push_back(std::make_unique<std::mutex>());
  }
  const auto &id = clients_.front()->study().study_id;
  for (const auto &c : clients_)
    if (c->study().study_id != id)
      throw Error(ErrorCode::invalid_argument, "servers disagree on the study: '" + id + "' at " +
                                                   net::to_string(clients_.front()->address()) + " vs '" +
                                                   c->study().study_id + "' at " + net::to_string(c->address()));
}

std::vector<std::string> Dispatcher::server_labels() const {
  std::vector<std::string> out;
  for (const auto &c : clients_) out.push_back(c->server_label());
  return out;
}

QueryResult Dispatcher::query(const space::Configuration &config, const FidelitySettings &fidelities) {
  std::size_t slot;
  {
    std::lock_guard lock(cursor_mutex_);
    slot = cursor_;
    cursor_ = (cursor_ + 1) % clients_.size();
  }
  std::lock_guard lock(*locks_[slot]);
  return clients_[slot]->query(config, fidelities);
}

QueryResult LocalEvaluator::evaluate(const space::Configuration &config, const FidelitySettings &fidelities) {
  auto result = backend_.evaluate(config, fidelities);
  result.evaluation_id = label_ + "-" + std::to_string(++count_);
  result.server_label = label_;
  return result;
}

}  // namespace catbench
