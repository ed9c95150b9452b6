#include "catbench/catbench.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "catbench/app.hpp"
#include "catbench/client.hpp"
#include "catbench/error.hpp"
#include "catbench/server.hpp"

struct cb_study {
  catbench::StudyDefinition study;
};

struct cb_server {
  std::unique_ptr<catbench::Server> server;
};

struct cb_client {
  std::unique_ptr<catbench::Client> client;
};

namespace {

thread_local std::string last_error;

cb_status fail(cb_status status, const std::string &message) {
  last_error = message;
  return status;
}

// Runs fn, translating exceptions into status codes and last_error.
template <class Fn>
cb_status guard(Fn &&fn) {
  last_error.clear();
  try {
    fn();
    return CB_OK;
  } catch (const catbench::Error &e) {
    return fail(static_cast<cb_status>(e.code()), e.what());
  } catch (const nlohmann::json::exception &e) {
    return fail(CB_PARSE, e.what());
  } catch (const std::invalid_argument &e) {
    return fail(CB_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range &e) {
    return fail(CB_INVALID_ARGUMENT, e.what());
  } catch (const std::exception &e) {
    return fail(CB_INTERNAL, e.what());
  } catch (...) {
    return fail(CB_INTERNAL, "unknown exception");
  }
}

char *dup(const std::string &s) {
  auto *out = static_cast<char *>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char **out, const std::string &s) {
  if (out) *out = dup(s);
}

nlohmann::json parse_json(const char *text, const char *what) {
  if (!text || !*text) return nlohmann::json::object();
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw catbench::Error(catbench::ErrorCode::parse, std::string(what) + " is not valid JSON");
  return j;
}

void require(const void *p, const char *what) {
  if (!p) throw catbench::Error(catbench::ErrorCode::invalid_argument, std::string(what) + " must not be null");
}

}  // namespace

extern "C" {

const char *cb_version(void) { return "1.0.0"; }

const char *cb_status_string(cb_status status) {
  if (status == CB_OK) return "ok";
  static thread_local std::string name;
  name = std::string(catbench::to_string(static_cast<catbench::ErrorCode>(status)));
  return name.c_str();
}

const char *cb_last_error(void) { return last_error.c_str(); }

void cb_string_free(char *s) { std::free(s); }

cb_status cb_study_load(const char *study, cb_study **out) {
  return guard([&] {
    require(study, "study");
    require(out, "out");
    *out = new cb_study{catbench::app::resolve_study(study)};
  });
}

void cb_study_free(cb_study *study) { delete study; }

cb_status cb_study_to_json(const cb_study *study, char **out_json) {
  return guard([&] {
    require(study, "study");
    put(out_json, study->study.document.dump());
  });
}

cb_status cb_study_cardinality(const cb_study *study, char **out_decimal) {
  return guard([&] {
    require(study, "study");
    put(out_decimal, catbench::space::cardinality(study->study.search_space).str());
  });
}

cb_status cb_study_validate(const cb_study *study, const char *config_json, int *out_valid, char **out_violated) {
  return guard([&] {
    require(study, "study");
    require(out_valid, "out_valid");
    const auto &space = study->study.search_space;
    const auto verdict = catbench::space::validate(space, space.config_from_json(parse_json(config_json, "config")));
    *out_valid = verdict.valid ? 1 : 0;
    put(out_violated, nlohmann::json(verdict.violated).dump());
  });
}

cb_status cb_study_sample(const cb_study *study, uint64_t seed, size_t n, char **out_json) {
  return guard([&] {
    require(study, "study");
    const auto &space = study->study.search_space;
    auto doc = nlohmann::json::array();
    for (const auto &c : catbench::space::sample_valid(space, seed, n)) doc.push_back(space.config_to_json(c));
    put(out_json, doc.dump());
  });
}

cb_status cb_server_create(const cb_study *study, const char *options_json, cb_server **out) {
  return guard([&] {
    require(study, "study");
    require(out, "out");
    const auto options = parse_json(options_json, "server options");
    catbench::ServerOptions so;
    so.bind = catbench::net::parse_address(options.value("bind", std::string("127.0.0.1:0")));
    so.label = options.value("label", std::string());
    std::optional<std::filesystem::path> log;
    if (options.contains("surrogate_log") && !options["surrogate_log"].is_null())
      log = options["surrogate_log"].get<std::string>();
    auto backend = catbench::make_backend(study->study, options.value("backend", std::string("kernel")), log,
                                          options.value("seed", std::uint64_t{0}));
    *out = new cb_server{std::make_unique<catbench::Server>(std::move(backend), so)};
  });
}

uint16_t cb_server_port(const cb_server *server) { return server ? server->server->port() : 0; }

cb_status cb_server_run(cb_server *server) {
  return guard([&] {
    require(server, "server");
    server->server->run();
  });
}

void cb_server_request_stop(cb_server *server) {
  if (server) server->server->request_stop();
}

int cb_server_init_count(const cb_server *server) { return server ? server->server->init_count() : 0; }

void cb_server_free(cb_server *server) { delete server; }

cb_status cb_client_connect(const char *address, int64_t timeout_ms, cb_client **out) {
  return guard([&] {
    require(address, "address");
    require(out, "out");
    catbench::ClientOptions options;
    if (timeout_ms > 0) options.timeout = std::chrono::milliseconds(timeout_ms);
    *out = new cb_client{std::make_unique<catbench::Client>(catbench::net::parse_address(address), options)};
  });
}

cb_status cb_client_study_json(const cb_client *client, char **out_json) {
  return guard([&] {
    require(client, "client");
    put(out_json, client->client->study().document.dump());
  });
}

cb_status cb_client_query(cb_client *client, const char *config_json, const char *fidelities_json,
                          char **out_result_json) {
  return guard([&] {
    require(client, "client");
    const auto result =
        client->client->query(parse_json(config_json, "config"), parse_json(fidelities_json, "fidelities"));
    put(out_result_json, catbench::result_to_json(result).dump());
  });
}

cb_status cb_client_shutdown_server(cb_client *client) {
  return guard([&] {
    require(client, "client");
    client->client->shutdown_server();
  });
}

void cb_client_free(cb_client *client) { delete client; }

cb_status cb_run(const char *manifest_json, char **out_summary_json) {
  return guard([&] {
    const auto manifest = catbench::app::parse_manifest(parse_json(manifest_json, "manifest"));
    const auto s = catbench::app::run(manifest);
    put(out_summary_json, nlohmann::json{{"evaluated", s.evaluated},
                                         {"replayed", s.replayed},
                                         {"skipped_runs", s.skipped_runs},
                                         {"servers", s.server_labels}}
                              .dump());
  });
}

cb_status cb_analyze(const char *subcommand, const char *log_path, const char *options_json, char **out_table,
                     char **out_summary) {
  return guard([&] {
    require(subcommand, "subcommand");
    require(log_path, "log_path");
    const auto a = catbench::app::analyze(subcommand, log_path, parse_json(options_json, "analysis options"));
    put(out_table, a.table);
    put(out_summary, a.summary.dump());
  });
}

cb_status cb_surrogate(const char *subcommand, const char *options_json, char **out_table, char **out_summary) {
  return guard([&] {
    require(subcommand, "subcommand");
    const auto a = catbench::app::surrogate_command(subcommand, parse_json(options_json, "surrogate options"));
    put(out_table, a.table);
    put(out_summary, a.summary.dump());
  });
}

}  // extern "C"
