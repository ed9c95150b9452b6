#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "catbench/evaluation.hpp"
#include "catbench/space.hpp"

namespace catbench {

// One evaluation as persisted in a log: one JSON object per line with exactly
// these fields.
struct EvaluationRecord {
  std::string study_id;
  std::string server_label;
  space::Configuration config;
  FidelitySettings fidelities;
  QueryResult result;
  std::string optimizer;
  std::uint64_t seed = 0;
  std::int64_t iteration = 0;
  std::int64_t timestamp_ms = 0;  // wall clock, milliseconds since the epoch

  friend bool operator==(const EvaluationRecord &, const EvaluationRecord &) = default;
};

json fidelity_settings_to_json(const FidelitySettings &f);
FidelitySettings fidelity_settings_from_json(const json &j);  // all four keys optional

json record_to_json(const space::SearchSpace &space, const EvaluationRecord &r);
// Throws parse on schema errors and invalid_config on values outside the space.
EvaluationRecord record_from_json(const space::SearchSpace &space, const json &j);

// Reads every non-blank line; throws io when the file cannot be opened and
// parse (naming the line number) on malformed lines.
std::vector<EvaluationRecord> read_log(const std::filesystem::path &path,
                                       const space::SearchSpace &space);

// Appends and flushes one line per record.
class LogWriter {
 public:
  LogWriter(const std::filesystem::path &path, const space::SearchSpace &space);
  void append(const EvaluationRecord &r);

 private:
  std::filesystem::path path_;
  const space::SearchSpace *space_;
};

void write_log(const std::filesystem::path &path, const space::SearchSpace &space,
               const std::vector<EvaluationRecord> &records);

std::int64_t now_ms();

// Objective value of a feasible record; nullopt when infeasible or absent.
std::optional<double> objective_of(const EvaluationRecord &r, const std::string &objective);

}  // namespace catbench
