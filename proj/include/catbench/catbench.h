#pragma once

/* C interface to the catbench library. Handles are opaque; every function
 * that can fail returns a cb_status, and the message of the most recent
 * failure on the calling thread is available from cb_last_error(). Strings
 * returned through out-parameters are owned by the caller and released with
 * cb_string_free(). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CB_API __declspec(dllexport)
#else
#define CB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cb_status {
  CB_OK = 0,
  CB_INVALID_ARGUMENT = 1,
  CB_MALFORMED_SPACE = 2,
  CB_INFEASIBLE_SPACE = 3,
  CB_TOO_LARGE = 4,
  CB_MALFORMED_PROBLEM = 5,
  CB_INVALID_CONFIG = 6,
  CB_INSUFFICIENT_DATA = 7,
  CB_UNDEFINED_SCORE = 8,
  CB_IO = 9,
  CB_PARSE = 10,
  CB_PROTOCOL = 11,
  CB_TRANSPORT = 12,
  CB_TIMEOUT = 13,
  CB_UNSUPPORTED_VERSION = 14,
  CB_NO_RECORDS = 15,
  CB_INTERNAL = 16
} cb_status;

typedef struct cb_study cb_study;
typedef struct cb_server cb_server;
typedef struct cb_client cb_client;

CB_API const char *cb_version(void);
CB_API const char *cb_status_string(cb_status status);
/* Thread-local; empty when the last call succeeded. */
CB_API const char *cb_last_error(void);
CB_API void cb_string_free(char *s);

/* Studies. `study` is a file path or a bundled id such as "gemm-cpu". */
CB_API cb_status cb_study_load(const char *study, cb_study **out);
CB_API void cb_study_free(cb_study *study);
CB_API cb_status cb_study_to_json(const cb_study *study, char **out_json);
/* |S| as a decimal string. */
CB_API cb_status cb_study_cardinality(const cb_study *study, char **out_decimal);
/* Known-constraint check of a JSON configuration object. *out_valid is 1 or
 * 0; out_violated (optional) receives a JSON array of violated indices. */
CB_API cb_status cb_study_validate(const cb_study *study, const char *config_json, int *out_valid,
                                   char **out_violated);
/* n valid configurations as a JSON array. */
CB_API cb_status cb_study_sample(const cb_study *study, uint64_t seed, size_t n, char **out_json);

/* Servers. options_json keys: bind ("host:port"), backend ("kernel" or
 * "surrogate"), surrogate_log, label, seed. Binding happens here. */
CB_API cb_status cb_server_create(const cb_study *study, const char *options_json, cb_server **out);
CB_API uint16_t cb_server_port(const cb_server *server);
/* Blocks until a shutdown message or cb_server_request_stop(). */
CB_API cb_status cb_server_run(cb_server *server);
/* Async-signal-safe. */
CB_API void cb_server_request_stop(cb_server *server);
CB_API int cb_server_init_count(const cb_server *server);
CB_API void cb_server_free(cb_server *server);

/* Clients. timeout_ms <= 0 uses the default of 600 s. */
CB_API cb_status cb_client_connect(const char *address, int64_t timeout_ms, cb_client **out);
CB_API cb_status cb_client_study_json(const cb_client *client, char **out_json);
/* On CB_INVALID_CONFIG the server's message is in cb_last_error(). */
CB_API cb_status cb_client_query(cb_client *client, const char *config_json, const char *fidelities_json,
                                 char **out_result_json);
CB_API cb_status cb_client_shutdown_server(cb_client *client);
CB_API void cb_client_free(cb_client *client);

/* Runs an optimizer manifest; out_summary_json (optional) receives counts. */
CB_API cb_status cb_run(const char *manifest_json, char **out_summary_json);
/* subcommand: trajectory, hypervolume, speedup, importance, pareto. Writes
 * the tab-separated table to out_table and a JSON summary to out_summary
 * (both optional). */
CB_API cb_status cb_analyze(const char *subcommand, const char *log_path, const char *options_json,
                            char **out_table, char **out_summary);
/* subcommand: fit or r2. */
CB_API cb_status cb_surrogate(const char *subcommand, const char *options_json, char **out_table,
                              char **out_summary);

#ifdef __cplusplus
}
#endif
