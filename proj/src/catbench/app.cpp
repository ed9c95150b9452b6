#include "catbench/app.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "catbench/backend.hpp"
#include "catbench/client.hpp"
#include "catbench/error.hpp"
#include "catbench/kernels.hpp"
#include "catbench/metrics.hpp"
#include "catbench/optimizers.hpp"
#include "catbench/surrogate.hpp"

namespace catbench::app {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string &message) { throw Error(ErrorCode::invalid_argument, message); }

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string cell(const std::optional<double> &v) { return v ? num(*v) : "none"; }

std::vector<std::string> study_objectives(const StudyDefinition &study) {
  std::vector<std::string> out;
  for (const auto &o : study.objectives) out.push_back(o.name);
  return out;
}

std::string string_option(const json &options, const char *key, const std::string &fallback) {
  const auto it = options.find(key);
  if (it == options.end() || it->is_null()) return fallback;
  if (!it->is_string()) bad(std::string("option '") + key + "' must be a string");
  return it->get<std::string>();
}

double number_option(const json &options, const char *key, double fallback) {
  const auto it = options.find(key);
  if (it == options.end() || it->is_null()) return fallback;
  if (!it->is_number()) bad(std::string("option '") + key + "' must be a number");
  return it->get<double>();
}

std::vector<std::string> list_option(const json &options, const char *key) {
  const auto it = options.find(key);
  if (it == options.end() || it->is_null()) return {};
  if (it->is_string()) {
    std::vector<std::string> out;
    std::string item;
    for (char c : it->get<std::string>() + ",") {
      if (c != ',') {
        item += c;
      } else if (!item.empty()) {
        out.push_back(item);
        item.clear();
      }
    }
    return out;
  }
  if (!it->is_array()) bad(std::string("option '") + key + "' must be a list");
  return it->get<std::vector<std::string>>();
}

void check_objectives(const StudyDefinition &study, const std::vector<std::string> &objectives) {
  for (const auto &o : objectives)
    if (!study.objective_index(o)) bad("study '" + study.study_id + "' has no objective '" + o + "'");
}

using RunKey = std::pair<std::string, std::uint64_t>;

std::map<RunKey, std::vector<EvaluationRecord>> group_runs(const std::vector<EvaluationRecord> &records) {
  std::map<RunKey, std::vector<EvaluationRecord>> runs;
  for (const auto &r : records) runs[{r.optimizer, r.seed}].push_back(r);
  for (auto &[key, list] : runs)
    std::stable_sort(list.begin(), list.end(), [](const auto &a, const auto &b) { return a.iteration < b.iteration; });
  return runs;
}

std::vector<EvaluationRecord> load_records(const fs::path &log, const StudyDefinition &study) {
  auto records = read_log(log, study.search_space);
  if (records.empty()) throw Error(ErrorCode::no_records, "no records in " + log.string());
  return records;
}

std::vector<metrics::Point> objective_points(const std::vector<EvaluationRecord> &records,
                                             const std::vector<std::string> &objectives,
                                             std::vector<const EvaluationRecord *> *sources = nullptr) {
  std::vector<metrics::Point> points;
  for (const auto &r : records) {
    metrics::Point p;
    for (const auto &o : objectives) {
      const auto v = objective_of(r, o);
      if (!v || !std::isfinite(*v)) break;
      p.push_back(*v);
    }
    if (p.size() != objectives.size()) continue;
    points.push_back(std::move(p));
    if (sources) sources->push_back(&r);
  }
  return points;
}

std::vector<std::string> pair_of_objectives(const StudyDefinition &study, const json &options) {
  auto objectives = list_option(options, "objectives");
  if (objectives.empty()) {
    const auto all = study_objectives(study);
    if (all.size() < 2) bad("study '" + study.study_id + "' has fewer than two objectives");
    objectives = {all[0], all[1]};
  }
  if (objectives.size() != 2) bad("hypervolume needs exactly two objectives");
  check_objectives(study, objectives);
  return objectives;
}

Analysis analyze_trajectory(const StudyDefinition &study, const std::vector<EvaluationRecord> &records,
                            const json &options) {
  const auto objective = string_option(options, "objective", study.objectives.front().name);
  check_objectives(study, {objective});
  std::map<std::string, std::vector<std::vector<std::optional<double>>>> by_optimizer;
  for (const auto &[key, run] : group_runs(records)) {
    try {
      by_optimizer[key.first].push_back(metrics::incumbent_trajectory(run, objective));
    } catch (const Error &e) {
      if (e.code() != ErrorCode::insufficient_data) throw;
      by_optimizer[key.first].push_back(std::vector<std::optional<double>>(run.size()));
    }
  }
  Analysis out;
  out.table = "optimizer\titeration\tmean\tlower\tupper\tseeds\n";
  for (const auto &[name, trajectories] : by_optimizer) {
    const auto band = metrics::trajectory_aggregate(trajectories);
    for (std::size_t i = 0; i < band.mean.size(); ++i)
      out.table += name + "\t" + std::to_string(i) + "\t" + cell(band.mean[i]) + "\t" + cell(band.lower[i]) + "\t" +
                   cell(band.upper[i]) + "\t" + std::to_string(band.seeds[i]) + "\n";
    json final_mean;
    if (!band.mean.empty() && band.mean.back()) final_mean = *band.mean.back();
    out.summary[name] = {{"seeds", trajectories.size()}, {"final_mean", final_mean}};
  }
  out.summary["objective"] = objective;
  return out;
}

Analysis analyze_hypervolume(const StudyDefinition &study, const std::vector<EvaluationRecord> &records,
                             const json &options) {
  const auto objectives = pair_of_objectives(study, options);
  metrics::Point ref;
  if (options.contains("ref") && !options["ref"].is_null()) {
    const auto &r = options["ref"];
    if (r.is_string()) {
      for (const auto &s : list_option(options, "ref")) ref.push_back(std::stod(s));
    } else {
      ref = r.get<metrics::Point>();
    }
    if (ref.size() != 2) bad("reference point needs two values");
  } else {
    const auto all = objective_points(records, objectives);
    if (all.empty()) throw Error(ErrorCode::insufficient_data, "no feasible records to derive a reference point from");
    ref = metrics::default_reference(all);
  }
  Analysis out;
  out.table = "optimizer\tseed\thypervolume\tref_" + objectives[0] + "\tref_" + objectives[1] + "\tclipped\tpoints\n";
  for (const auto &[key, run] : group_runs(records)) {
    const auto points = objective_points(run, objectives);
    const auto hv = metrics::hypervolume_2d(points, ref);
    out.table += key.first + "\t" + std::to_string(key.second) + "\t" + num(hv.value) + "\t" + num(ref[0]) + "\t" +
                 num(ref[1]) + "\t" + std::to_string(hv.clipped) + "\t" + std::to_string(points.size()) + "\n";
  }
  out.summary = {{"objectives", objectives}, {"reference", ref}};
  return out;
}

double speedup_baseline(const StudyDefinition &study, const std::vector<EvaluationRecord> &records,
                        const std::string &objective, const json &options, std::string &source) {
  if (options.contains("baseline") && !options["baseline"].is_null()) {
    source = "given";
    return number_option(options, "baseline", 0.0);
  }
  const auto base = kernels::default_config(study.search_space);
  std::vector<double> logged;
  for (const auto &r : records)
    if (r.config == base)
      if (const auto v = objective_of(r, objective)) logged.push_back(*v);
  if (!logged.empty()) {
    source = "log";
    std::sort(logged.begin(), logged.end());
    return logged[logged.size() / 2];
  }
  if (!study.kernel) bad("no baseline: pass one, or log the default configuration");
  kernels::KernelExecutor executor(study);
  const auto result = executor.execute(base, records.front().fidelities);
  const auto it = result.objectives.find(objective);
  if (!result.feasible || it == result.objectives.end()) bad("default configuration has no '" + objective + "'");
  source = "measured";
  return it->second;
}

Analysis analyze_speedup(const StudyDefinition &study, const std::vector<EvaluationRecord> &records,
                         const json &options) {
  const auto objective = string_option(options, "objective", study.objective_index("runtime_seconds")
                                                                 ? std::string("runtime_seconds")
                                                                 : study.objectives.front().name);
  check_objectives(study, {objective});
  std::vector<double> runtimes;
  for (const auto &r : records)
    if (const auto v = objective_of(r, objective)) runtimes.push_back(*v);
  std::string source;
  const double baseline = speedup_baseline(study, records, objective, options, source);
  const auto d = metrics::speedup_distribution(runtimes, baseline, static_cast<int>(number_option(options, "bins", 20)));
  Analysis out;
  out.table = "log10_speedup_lower\tlog10_speedup_upper\tspeedup_lower\tspeedup_upper\tdensity\n";
  for (std::size_t b = 0; b < d.densities.size(); ++b)
    out.table += num(d.edges[b]) + "\t" + num(d.edges[b + 1]) + "\t" + num(std::pow(10.0, d.edges[b])) + "\t" +
                 num(std::pow(10.0, d.edges[b + 1])) + "\t" + num(d.densities[b]) + "\n";
  out.summary = {{"objective", objective}, {"baseline", baseline}, {"baseline_source", source},
                 {"median", d.median},     {"max", d.max},           {"count", d.count},
                 {"binning", "fixed-width bins of log10(speedup); density per unit log10(speedup)"}};
  return out;
}

Analysis analyze_importance(const StudyDefinition &study, const std::vector<EvaluationRecord> &records,
                            const json &options) {
  const auto objective = string_option(options, "objective", study.objectives.front().name);
  check_objectives(study, {objective});
  const auto seed = static_cast<std::uint64_t>(number_option(options, "seed", 0));
  const auto rounds = static_cast<int>(number_option(options, "rounds", 10));
  const double fraction = number_option(options, "holdout_fraction", 0.25);
  auto [train, holdout] = metrics::split_records(records, fraction, seed);
  const auto model = surrogate::SurrogateModel::fit(study, train, {objective}, seed);
  const auto scores = metrics::permutation_importance(model, holdout, objective, seed, rounds);
  Analysis out;
  out.table = "parameter\timportance\n";
  for (std::size_t p = 0; p < scores.size(); ++p)
    out.table += study.search_space.parameters()[p].name + "\t" + num(scores[p]) + "\n";
  out.summary = {{"objective", objective}, {"rounds", rounds}, {"train", train.size()}, {"holdout", holdout.size()},
                 {"model", "ensemble"}};
  return out;
}

Analysis analyze_pareto(const StudyDefinition &study, const std::vector<EvaluationRecord> &records,
                        const json &options) {
  auto objectives = list_option(options, "objectives");
  if (objectives.empty()) objectives = study_objectives(study);
  check_objectives(study, objectives);
  std::vector<const EvaluationRecord *> sources;
  const auto points = objective_points(records, objectives, &sources);
  Analysis out;
  out.table = "optimizer\tseed\titeration\tserver_label";
  for (const auto &o : objectives) out.table += "\t" + o;
  out.table += "\tconfig\n";
  const auto front = metrics::pareto_front(points);
  for (auto i : front) {
    const auto &r = *sources[i];
    out.table += r.optimizer + "\t" + std::to_string(r.seed) + "\t" + std::to_string(r.iteration) + "\t" + r.server_label;
    for (double v : points[i]) out.table += "\t" + num(v);
    out.table += "\t" + study.search_space.config_to_json(r.config).dump() + "\n";
  }
  out.summary = {{"objectives", objectives}, {"front_size", front.size()}, {"feasible", points.size()}};
  return out;
}

surrogate::FitOptions fit_options(const json &options) {
  surrogate::FitOptions f;
  f.kind = surrogate::parse_model_kind(string_option(options, "kind", "ensemble"));
  f.knn_k = static_cast<int>(number_option(options, "k", f.knn_k));
  f.forest.trees = static_cast<int>(number_option(options, "trees", f.forest.trees));
  if (options.contains("log_target")) f.log_target = options["log_target"].get<bool>();
  return f;
}

}  // namespace

StudyDefinition resolve_study(const std::string &study) {
  if (study.empty()) bad("no study given");
  if (fs::exists(study)) return load_study(study);
  const auto path = bundled_study_path(study);
  if (!fs::exists(path)) bad("study '" + study + "' is neither a file nor a bundled study id");
  return load_study(path);
}

StudyDefinition study_of_log(const fs::path &log) {
  std::ifstream in(log);
  if (!in) throw Error(ErrorCode::io, "cannot open log " + log.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = json::parse(line, nullptr, false);
    if (!j.is_object() || !j.contains("study_id") || !j["study_id"].is_string())
      throw Error(ErrorCode::parse, log.string() + ":1: record lacks a study_id");
    return resolve_study(j["study_id"].get<std::string>());
  }
  throw Error(ErrorCode::no_records, "no records in " + log.string());
}

RunManifest parse_manifest(const json &d) {
  if (!d.is_object()) bad("manifest must be an object");
  RunManifest m;
  try {
    m.study = d.value("study", std::string());
    m.backend = d.value("backend", std::string("kernel"));
    if (d.contains("surrogate_log") && !d["surrogate_log"].is_null()) m.surrogate_log = d["surrogate_log"].get<std::string>();
    m.surrogate_seed = d.value("surrogate_seed", std::uint64_t{0});
    if (d.contains("optimizers")) m.optimizers = d["optimizers"].get<std::vector<std::string>>();
    if (d.contains("optimizer")) m.optimizers.push_back(d["optimizer"].get<std::string>());
    m.hyperparameters = d.value("hyperparameters", json::object());
    m.budget = d.at("budget").get<std::size_t>();
    m.seeds = d.at("seeds").get<std::vector<std::uint64_t>>();
    m.fidelities = d.value("fidelities", json::object());
    m.servers = d.value("servers", std::vector<std::string>{});
    m.log = d.at("log").get<std::string>();
    m.objectives = d.value("objectives", std::vector<std::string>{});
  } catch (const json::exception &e) {
    bad(std::string("manifest: ") + e.what());
  }
  if (m.optimizers.empty()) bad("manifest names no optimizer");
  for (const auto &o : m.optimizers)
    if (std::find(optimize::optimizer_names().begin(), optimize::optimizer_names().end(), o) ==
        optimize::optimizer_names().end())
      bad("unknown optimizer '" + o + "'");
  if (m.budget < 1) bad("budget must be at least 1");
  if (m.seeds.empty()) bad("manifest lists no seeds");
  if (std::set<std::uint64_t>(m.seeds.begin(), m.seeds.end()).size() != m.seeds.size()) bad("seeds must be distinct");
  if (m.log.empty()) bad("manifest names no log");
  if (m.study.empty() && m.servers.empty()) bad("manifest needs a study or servers");
  if (m.backend != "kernel" && m.backend != "surrogate") bad("backend must be kernel or surrogate");
  if (m.servers.empty() && m.backend == "surrogate" && !m.surrogate_log)
    bad("the surrogate backend requires surrogate_log");
  if (m.surrogate_log && !fs::exists(*m.surrogate_log)) bad("surrogate log " + *m.surrogate_log + " does not exist");
  if (!m.study.empty() && !fs::exists(m.study) && !fs::exists(bundled_study_path(m.study)))
    bad("study '" + m.study + "' is neither a file nor a bundled study id");
  return m;
}

json manifest_to_json(const RunManifest &m) {
  json j{{"study", m.study},       {"backend", m.backend},   {"surrogate_seed", m.surrogate_seed},
         {"optimizers", m.optimizers}, {"hyperparameters", m.hyperparameters}, {"budget", m.budget},
         {"seeds", m.seeds},       {"fidelities", m.fidelities}, {"servers", m.servers},
         {"log", m.log},           {"objectives", m.objectives}};
  j["surrogate_log"] = m.surrogate_log ? json(*m.surrogate_log) : json();
  return j;
}

RunSummary run(const RunManifest &m) {
  RunSummary summary;
  std::unique_ptr<Backend> backend;
  std::unique_ptr<Dispatcher> dispatcher;
  std::unique_ptr<Evaluator> evaluator;
  if (!m.servers.empty()) {
    std::vector<net::Address> addresses;
    for (const auto &s : m.servers) addresses.push_back(net::parse_address(s));
    dispatcher = std::make_unique<Dispatcher>(addresses);
    if (!m.study.empty()) {
      const auto local = resolve_study(m.study);
      if (local.study_id != dispatcher->study().study_id)
        bad("servers serve '" + dispatcher->study().study_id + "' but the manifest names '" + local.study_id + "'");
    }
    evaluator = std::make_unique<RemoteEvaluator>(*dispatcher);
    summary.server_labels = dispatcher->server_labels();
  } else {
    backend = make_backend(resolve_study(m.study), m.backend,
                           m.surrogate_log ? std::optional<fs::path>(*m.surrogate_log) : std::nullopt, m.surrogate_seed);
    backend->initialize();
    evaluator = std::make_unique<LocalEvaluator>(*backend);
    summary.server_labels = {"local"};
  }
  const auto &study = evaluator->study();
  auto objectives = m.objectives.empty() ? study_objectives(study) : m.objectives;
  check_objectives(study, objectives);
  const auto fidelities = resolve_fidelities(study, m.fidelities);

  std::map<RunKey, std::vector<EvaluationRecord>> existing;
  if (fs::exists(m.log)) {
    auto records = read_log(m.log, study.search_space);
    std::erase_if(records, [&](const auto &r) { return r.study_id != study.study_id; });
    existing = group_runs(records);
  }
  LogWriter writer(m.log, study.search_space);
  for (const auto &name : m.optimizers) {
    for (const auto seed : m.seeds) {
      const auto it = existing.find({name, seed});
      std::vector<EvaluationRecord> replay;
      if (it != existing.end()) {
        replay = it->second;
        for (std::size_t i = 0; i < replay.size(); ++i)
          if (replay[i].iteration != static_cast<std::int64_t>(i))
            bad("log " + m.log + " has non-contiguous iterations for " + name + " seed " + std::to_string(seed));
        if (replay.size() >= m.budget) {
          ++summary.skipped_runs;
          continue;
        }
      }
      auto optimizer = optimize::make_optimizer(name, study, objectives, seed, m.budget, m.hyperparameters);
      optimize::run_optimizer(*optimizer, *evaluator, m.budget, seed, fidelities, replay,
                              [&](const EvaluationRecord &r) {
                                writer.append(r);
                                ++summary.evaluated;
                              });
      summary.replayed += replay.size();
    }
  }
  return summary;
}

Analysis analyze(const std::string &subcommand, const fs::path &log, const json &raw_options) {
  const json options = raw_options.is_null() ? json::object() : raw_options;
  if (!options.is_object()) bad("analysis options must be an object");
  static const std::set<std::string> known{"trajectory", "hypervolume", "speedup", "importance", "pareto"};
  if (!known.count(subcommand))
    bad("unknown analysis '" + subcommand + "' (expected trajectory, hypervolume, speedup, importance or pareto)");
  const auto study_arg = string_option(options, "study", "");
  const auto study = study_arg.empty() ? study_of_log(log) : resolve_study(study_arg);
  auto records = load_records(log, study);
  std::erase_if(records, [&](const auto &r) { return r.study_id != study.study_id; });
  if (records.empty()) throw Error(ErrorCode::no_records, "no records for study '" + study.study_id + "'");
  if (subcommand == "trajectory") return analyze_trajectory(study, records, options);
  if (subcommand == "hypervolume") return analyze_hypervolume(study, records, options);
  if (subcommand == "speedup") return analyze_speedup(study, records, options);
  if (subcommand == "importance") return analyze_importance(study, records, options);
  return analyze_pareto(study, records, options);
}

Analysis surrogate_command(const std::string &subcommand, const json &raw_options) {
  const json options = raw_options.is_null() ? json::object() : raw_options;
  if (subcommand != "fit" && subcommand != "r2") bad("unknown surrogate command '" + subcommand + "' (expected fit or r2)");
  const auto seed = static_cast<std::uint64_t>(number_option(options, "seed", 0));
  const auto log = string_option(options, "log", "");
  const auto model_path = string_option(options, "model", "");

  if (subcommand == "fit") {
    if (log.empty()) bad("surrogate fit needs a log");
    const auto out = string_option(options, "out", "");
    if (out.empty()) bad("surrogate fit needs an output path");
    const auto study_arg = string_option(options, "study", "");
    const auto study = study_arg.empty() ? study_of_log(log) : resolve_study(study_arg);
    const auto records = load_records(log, study);
    auto objectives = list_option(options, "objectives");
    if (objectives.empty()) objectives = study_objectives(study);
    const auto model = surrogate::SurrogateModel::fit(study, records, objectives, seed, fit_options(options));
    std::ofstream file(out);
    if (!file) throw Error(ErrorCode::io, "cannot write " + out);
    file << model.to_json().dump() << "\n";
    if (!file) throw Error(ErrorCode::io, "write to " + out + " failed");
    Analysis a;
    a.table = "objective\trecords\tkind\n";
    for (const auto &o : objectives)
      a.table += o + "\t" + std::to_string(model.record_count()) + "\t" + std::string(surrogate::to_string(model.options().kind)) + "\n";
    a.summary = {{"model", out}, {"records", model.record_count()}, {"objectives", objectives}};
    return a;
  }

  std::optional<surrogate::SurrogateModel> model;
  std::vector<EvaluationRecord> holdout;
  std::size_t train_size = 0;
  StudyDefinition study;
  const auto holdout_path = string_option(options, "holdout", "");
  if (!model_path.empty()) {
    std::ifstream in(model_path);
    if (!in) throw Error(ErrorCode::io, "cannot open model " + model_path);
    const auto doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::parse, "model " + model_path + " is not valid JSON");
    model = surrogate::SurrogateModel::from_json(doc);
    study = model->study();
    const auto source = holdout_path.empty() ? log : holdout_path;
    if (source.empty()) bad("surrogate r2 with a model needs a holdout or log");
    holdout = load_records(source, study);
    train_size = model->record_count();
  } else {
    if (log.empty()) bad("surrogate r2 needs a log or a model");
    const auto study_arg = string_option(options, "study", "");
    study = study_arg.empty() ? study_of_log(log) : resolve_study(study_arg);
    auto records = load_records(log, study);
    std::vector<EvaluationRecord> train;
    if (!holdout_path.empty()) {
      train = std::move(records);
      holdout = load_records(holdout_path, study);
    } else if (options.value("self", false)) {
      train = records;
      holdout = std::move(records);
    } else {
      std::tie(train, holdout) = metrics::split_records(records, number_option(options, "holdout_fraction", 0.2), seed);
    }
    auto objectives = list_option(options, "objectives");
    if (objectives.empty()) objectives = study_objectives(study);
    model = surrogate::SurrogateModel::fit(study, train, objectives, seed, fit_options(options));
    train_size = model->record_count();
  }
  Analysis a;
  a.table = "objective\tr2\ttrain\tholdout\n";
  for (const auto &o : model->objectives()) {
    std::size_t n = 0;
    for (const auto &r : holdout) n += objective_of(r, o) ? 1 : 0;
    const double score = surrogate::r2_score(*model, holdout, o);
    a.table += o + "\t" + num(score) + "\t" + std::to_string(train_size) + "\t" + std::to_string(n) + "\n";
    a.summary[o] = score;
  }
  return a;
}

}  // namespace catbench::app
