#include "catbench/records.hpp"

#include <chrono>
#include <fstream>

#include "catbench/error.hpp"

namespace catbench {

json fidelity_settings_to_json(const FidelitySettings &f) {
  return json{{kFidelityIterations, f.iterations},
              {kFidelityRepeats, f.repeats},
              {kFidelityWaitBetween, f.wait_between_repeats_ms},
              {kFidelityWaitAfter, f.wait_after_evaluation_ms}};
}

FidelitySettings fidelity_settings_from_json(const json &j) {
  FidelitySettings f;
  if (j.is_null()) return f;
  f.iterations = j.value(kFidelityIterations, f.iterations);
  f.repeats = j.value(kFidelityRepeats, f.repeats);
  f.wait_between_repeats_ms = j.value(kFidelityWaitBetween, f.wait_between_repeats_ms);
  f.wait_after_evaluation_ms = j.value(kFidelityWaitAfter, f.wait_after_evaluation_ms);
  return f;
}

json record_to_json(const space::SearchSpace &space, const EvaluationRecord &r) {
  return json{{"study_id", r.study_id},
              {"server_label", r.server_label},
              {"config", space.config_to_json(r.config)},
              {"fidelities", fidelity_settings_to_json(r.fidelities)},
              {"result", result_to_json(r.result)},
              {"optimizer", r.optimizer},
              {"seed", r.seed},
              {"iteration", r.iteration},
              {"timestamp", r.timestamp_ms}};
}

EvaluationRecord record_from_json(const space::SearchSpace &space, const json &j) {
  EvaluationRecord r;
  try {
    r.study_id = j.at("study_id").get<std::string>();
    r.server_label = j.at("server_label").get<std::string>();
    r.config = space.config_from_json(j.at("config"));
    r.fidelities = fidelity_settings_from_json(j.at("fidelities"));
    r.result = result_from_json(j.at("result"));
    r.optimizer = j.at("optimizer").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.iteration = j.at("iteration").get<std::int64_t>();
    r.timestamp_ms = j.at("timestamp").get<std::int64_t>();
  } catch (const json::exception &e) {
    throw Error(ErrorCode::parse, std::string("evaluation record: ") + e.what());
  }
  space.check_domain(r.config);
  return r;
}

std::vector<EvaluationRecord> read_log(const std::filesystem::path &path,
                                       const space::SearchSpace &space) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open log " + path.string());
  std::vector<EvaluationRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(space, json::parse(line)));
    } catch (const json::exception &e) {
      throw Error(ErrorCode::parse, path.string() + ":" + std::to_string(number) + ": " + e.what());
    } catch (const Error &e) {
      throw Error(e.code() == ErrorCode::invalid_config ? ErrorCode::parse : e.code(),
                  path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

LogWriter::LogWriter(const std::filesystem::path &path, const space::SearchSpace &space)
    : path_(path), space_(&space) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream probe(path_, std::ios::app);
  if (!probe) throw Error(ErrorCode::io, "cannot open log " + path_.string() + " for appending");
}

void LogWriter::append(const EvaluationRecord &r) {
  std::ofstream out(path_, std::ios::app);
  out << record_to_json(*space_, r).dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::io, "write to " + path_.string() + " failed");
}

void write_log(const std::filesystem::path &path, const space::SearchSpace &space,
               const std::vector<EvaluationRecord> &records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  for (const auto &r : records) out << record_to_json(space, r).dump() << '\n';
  if (!out) throw Error(ErrorCode::io, "write to " + path.string() + " failed");
}

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::optional<double> objective_of(const EvaluationRecord &r, const std::string &objective) {
  if (!r.result.feasible) return std::nullopt;
  auto it = r.result.objectives.find(objective);
  if (it == r.result.objectives.end()) return std::nullopt;
  return it->second;
}

}  // namespace catbench
