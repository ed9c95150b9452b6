// catbench command-line entry point: serve, run, analyze, surrogate.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "catbench/catbench.h"
#include "json.hpp"

using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr const char *kServersEnv = "CATBENCH_SERVERS";

cb_server *g_server = nullptr;

void on_signal(int) { cb_server_request_stop(g_server); }

struct Owned {
  char *p = nullptr;
  ~Owned() { cb_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

int report(cb_status status) {
  if (status == CB_OK) return 0;
  std::cerr << "catbench: " << cb_status_string(status) << ": " << cb_last_error() << "\n";
  return kExitFailure;
}

int usage(const std::string &message) {
  std::cerr << "catbench: usage error: " << message << "\n";
  return kExitUsage;
}

std::vector<std::string> split_list(const std::string &text) {
  std::vector<std::string> out;
  std::string item;
  for (char c : text + ",") {
    if (c == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else if (c != ' ') {
      item += c;
    }
  }
  return out;
}

// "name=value" pairs into a JSON object; integers stay integers.
json key_values(const std::vector<std::string> &pairs) {
  json out = json::object();
  for (const auto &p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError(p, "expected name=value");
    const auto value = p.substr(eq + 1);
    const auto parsed = json::parse(value, nullptr, false);
    out[p.substr(0, eq)] = parsed.is_discarded() ? json(value) : parsed;
  }
  return out;
}

bool write_output(const std::string &path, const std::string &text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return true;
  }
  std::ofstream out(path);
  out << text;
  if (!out) {
    std::cerr << "catbench: cannot write " << path << "\n";
    return false;
  }
  return true;
}

struct ServeArgs {
  std::string benchmark, study, bind = "127.0.0.1:7070", backend = "kernel", surrogate_log, label;
  std::uint64_t seed = 0;
};

int cmd_serve(const ServeArgs &a) {
  if (a.benchmark.empty() == a.study.empty()) return usage("serve needs exactly one of --benchmark or --study");
  if (a.backend == "surrogate" && a.surrogate_log.empty()) return usage("--backend surrogate requires --surrogate-log");
  if (!a.study.empty() && !std::ifstream(a.study)) {
    std::cerr << "catbench: study file " << a.study << " does not exist\n";
    return kExitFailure;
  }
  cb_study *study = nullptr;
  if (const auto s = cb_study_load(a.study.empty() ? a.benchmark.c_str() : a.study.c_str(), &study); s != CB_OK)
    return report(s);
  json options{{"bind", a.bind}, {"backend", a.backend}, {"label", a.label}, {"seed", a.seed}};
  if (!a.surrogate_log.empty()) options["surrogate_log"] = a.surrogate_log;
  const auto created = cb_server_create(study, options.dump().c_str(), &g_server);
  cb_study_free(study);
  if (created != CB_OK) return report(created);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on port " << cb_server_port(g_server) << std::endl;
  const auto status = cb_server_run(g_server);
  std::cout << "shutdown after " << cb_server_init_count(g_server) << " backend initialization(s)" << std::endl;
  cb_server_free(g_server);
  g_server = nullptr;
  return report(status);
}

struct RunArgs {
  std::string manifest, study, backend, surrogate_log, log, seeds;
  std::vector<std::string> optimizers, servers, fidelities, params, objectives;
  std::optional<std::size_t> budget;
  bool local = false;
};

int cmd_run(const RunArgs &a) {
  json m = json::object();
  if (!a.manifest.empty()) {
    std::ifstream in(a.manifest);
    if (!in) {
      std::cerr << "catbench: cannot open manifest " << a.manifest << "\n";
      return kExitFailure;
    }
    m = json::parse(in, nullptr, false);
    if (m.is_discarded() || !m.is_object()) {
      std::cerr << "catbench: manifest " << a.manifest << " is not a JSON object\n";
      return kExitFailure;
    }
  }
  if (!a.study.empty()) m["study"] = a.study;
  if (!a.backend.empty()) m["backend"] = a.backend;
  if (!a.surrogate_log.empty()) m["surrogate_log"] = a.surrogate_log;
  if (!a.log.empty()) m["log"] = a.log;
  if (a.budget) m["budget"] = *a.budget;
  if (!a.optimizers.empty()) {
    m.erase("optimizer");
    m["optimizers"] = a.optimizers;
  }
  if (!a.seeds.empty()) {
    json seeds = json::array();
    for (const auto &s : split_list(a.seeds)) seeds.push_back(std::stoull(s));
    m["seeds"] = seeds;
  }
  if (!a.fidelities.empty()) m["fidelities"] = key_values(a.fidelities);
  if (!a.params.empty()) m["hyperparameters"] = key_values(a.params);
  if (!a.objectives.empty()) m["objectives"] = a.objectives;
  if (!a.servers.empty()) {
    m["servers"] = a.servers;
  } else if (a.local) {
    m["servers"] = json::array();
  } else if (!m.contains("servers") || m["servers"].empty()) {
    if (const char *env = std::getenv(kServersEnv); env && *env) m["servers"] = split_list(env);
  }
  Owned summary;
  const auto status = cb_run(m.dump().c_str(), &summary.p);
  if (status != CB_OK) return report(status);
  std::cout << summary.str() << "\n";
  return 0;
}

struct AnalyzeArgs {
  std::string log, out, study, objective, objectives, ref;
  std::optional<double> baseline, holdout_fraction;
  std::optional<int> bins, rounds;
  std::optional<std::uint64_t> seed;
};

int cmd_analyze(const std::string &sub, const AnalyzeArgs &a) {
  json o = json::object();
  if (!a.study.empty()) o["study"] = a.study;
  if (!a.objective.empty()) o["objective"] = a.objective;
  if (!a.objectives.empty()) o["objectives"] = split_list(a.objectives);
  if (!a.ref.empty()) {
    json ref = json::array();
    for (const auto &v : split_list(a.ref)) ref.push_back(std::stod(v));
    o["ref"] = ref;
  }
  if (a.baseline) o["baseline"] = *a.baseline;
  if (a.holdout_fraction) o["holdout_fraction"] = *a.holdout_fraction;
  if (a.bins) o["bins"] = *a.bins;
  if (a.rounds) o["rounds"] = *a.rounds;
  if (a.seed) o["seed"] = *a.seed;
  Owned table, summary;
  const auto status = cb_analyze(sub.c_str(), a.log.c_str(), o.dump().c_str(), &table.p, &summary.p);
  if (status != CB_OK) return report(status);
  if (!write_output(a.out, table.str())) return kExitFailure;
  (a.out.empty() || a.out == "-" ? std::cerr : std::cout) << summary.str() << "\n";
  return 0;
}

struct SurrogateArgs {
  std::string log, out, model, holdout, study, kind, objectives;
  std::optional<int> k, trees;
  std::optional<double> holdout_fraction;
  std::optional<std::uint64_t> seed;
  bool self = false, log_target = false;
};

int cmd_surrogate(const std::string &sub, const SurrogateArgs &a) {
  json o = json::object();
  if (!a.log.empty()) o["log"] = a.log;
  if (!a.model.empty()) o["model"] = a.model;
  if (!a.holdout.empty()) o["holdout"] = a.holdout;
  if (!a.study.empty()) o["study"] = a.study;
  if (!a.kind.empty()) o["kind"] = a.kind;
  if (!a.objectives.empty()) o["objectives"] = split_list(a.objectives);
  if (a.k) o["k"] = *a.k;
  if (a.trees) o["trees"] = *a.trees;
  if (a.holdout_fraction) o["holdout_fraction"] = *a.holdout_fraction;
  if (a.seed) o["seed"] = *a.seed;
  if (a.self) o["self"] = true;
  if (a.log_target) o["log_target"] = true;
  if (sub == "fit") {
    if (a.out.empty()) return usage("surrogate fit requires --out");
    o["out"] = a.out;
  }
  Owned table, summary;
  const auto status = cb_surrogate(sub.c_str(), o.dump().c_str(), &table.p, &summary.p);
  if (status != CB_OK) return report(status);
  std::cout << table.str();
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"catbench: kernel autotuning benchmark suite"};
  app.require_subcommand(1);

  ServeArgs serve;
  auto *s = app.add_subcommand("serve", "Serve one benchmark over the framed wire protocol");
  s->add_option("--benchmark", serve.benchmark, "Bundled study id, e.g. gemm-cpu");
  s->add_option("--study", serve.study, "Study file");
  s->add_option("--bind", serve.bind, "Listen address host:port (port 0 picks one)")->capture_default_str();
  s->add_option("--backend", serve.backend, "kernel or surrogate")
      ->check(CLI::IsMember({"kernel", "surrogate"}))
      ->capture_default_str();
  s->add_option("--surrogate-log", serve.surrogate_log, "Evaluation log the surrogate is fitted on");
  s->add_option("--label", serve.label, "Server label reported in results (default hostname:port)");
  s->add_option("--seed", serve.seed, "Surrogate fitting seed");

  RunArgs run;
  std::size_t budget = 0;
  auto *r = app.add_subcommand("run", "Run optimizers against a study and append to a log");
  r->add_option("--manifest", run.manifest, "Run manifest (JSON); flags override its fields");
  r->add_option("--study", run.study, "Study file or bundled id");
  r->add_option("--backend", run.backend, "In-process backend: kernel or surrogate");
  r->add_option("--surrogate-log", run.surrogate_log, "Log for the in-process surrogate backend");
  r->add_option("--optimizer", run.optimizers, "random_search, nsga2 or model_based (repeatable)");
  auto *budget_opt = r->add_option("--budget", budget, "Evaluations per (optimizer, seed)");
  r->add_option("--seeds", run.seeds, "Comma-separated seeds");
  r->add_option("--fidelity", run.fidelities, "name=value (repeatable)");
  r->add_option("--param", run.params, "Optimizer hyperparameter name=value (repeatable)");
  r->add_option("--objective", run.objectives, "Objective to optimize (repeatable; default all)");
  r->add_option("--server", run.servers, std::string("Server host:port (repeatable; default $") + kServersEnv + ")");
  r->add_flag("--local", run.local, std::string("Ignore $") + kServersEnv + " and run in-process");
  r->add_option("--log", run.log, "Output log (appended; existing runs are resumed)");

  AnalyzeArgs analyze;
  std::string analysis;
  auto *an = app.add_subcommand("analyze", "Tabular analyses of an evaluation log");
  an->add_option("analysis", analysis, "trajectory, hypervolume, speedup, importance or pareto")
      ->required()
      ->check(CLI::IsMember({"trajectory", "hypervolume", "speedup", "importance", "pareto"}));
  an->add_option("--log", analyze.log, "Evaluation log")->required();
  an->add_option("--out", analyze.out, "Output table (default stdout)");
  an->add_option("--study", analyze.study, "Study file or id (default: the log's study)");
  an->add_option("--objective", analyze.objective, "Objective for trajectory, speedup, importance");
  an->add_option("--objectives", analyze.objectives, "Comma-separated objectives for hypervolume, pareto");
  an->add_option("--ref", analyze.ref, "Hypervolume reference point x,y (default 1.1 x per-objective max)");
  an->add_option("--baseline", analyze.baseline, "Speedup baseline runtime (default: default configuration)");
  an->add_option("--bins", analyze.bins, "Speedup histogram bins");
  an->add_option("--rounds", analyze.rounds, "Importance shuffle rounds");
  an->add_option("--seed", analyze.seed, "Importance split and shuffle seed");
  an->add_option("--holdout-fraction", analyze.holdout_fraction, "Importance holdout fraction");

  SurrogateArgs sur;
  std::string sur_cmd;
  auto *su = app.add_subcommand("surrogate", "Fit or score surrogate models");
  su->add_option("command", sur_cmd, "fit or r2")->required()->check(CLI::IsMember({"fit", "r2"}));
  su->add_option("--log", sur.log, "Training log");
  su->add_option("--out", sur.out, "Model output file (fit)");
  su->add_option("--model", sur.model, "Fitted model file (r2)");
  su->add_option("--holdout", sur.holdout, "Holdout log (r2)");
  su->add_option("--holdout-fraction", sur.holdout_fraction, "Random holdout fraction when no holdout log");
  su->add_flag("--self", sur.self, "Score on the training table itself");
  su->add_option("--study", sur.study, "Study file or id (default: the log's study)");
  su->add_option("--kind", sur.kind, "ensemble or knn")->check(CLI::IsMember({"ensemble", "knn"}));
  su->add_option("--k", sur.k, "Neighbours for knn");
  su->add_option("--trees", sur.trees, "Trees for ensemble");
  su->add_option("--objectives", sur.objectives, "Comma-separated objectives (default all)");
  su->add_option("--seed", sur.seed, "Fitting and split seed");
  su->add_flag("--log-target", sur.log_target, "Fit log(target)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*s) return cmd_serve(serve);
    if (*r) {
      if (budget_opt->count()) run.budget = budget;
      return cmd_run(run);
    }
    if (*an) return cmd_analyze(analysis, analyze);
    return cmd_surrogate(sur_cmd, sur);
  } catch (const std::exception &e) {
    std::cerr << "catbench: " << e.what() << "\n";
    return kExitUsage;
  }
}
