#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "catbench/study.hpp"

namespace catbench {

// Fidelity knobs of one evaluation. A study declares which of them it exposes;
// undeclared knobs keep these defaults.
struct FidelitySettings {
  std::int64_t iterations = 1;    // kernel executions per repeat
  std::int64_t repeats = 1;       // cache-flushed re-evaluations
  std::int64_t wait_between_repeats_ms = 0;
  std::int64_t wait_after_evaluation_ms = 0;

  friend bool operator==(const FidelitySettings &, const FidelitySettings &) = default;
};

inline constexpr const char *kFidelityIterations = "iterations";
inline constexpr const char *kFidelityRepeats = "repeats";
inline constexpr const char *kFidelityWaitBetween = "wait_between_repeats";
inline constexpr const char *kFidelityWaitAfter = "wait_after_evaluation";

FidelitySettings default_fidelities(const StudyDefinition &study);

// Fills undeclared entries with study defaults. Unknown names and values
// outside the declared domain raise InvalidConfigError.
FidelitySettings resolve_fidelities(const StudyDefinition &study, const json &object);

json fidelities_to_json(const StudyDefinition &study, const FidelitySettings &f);

// Declared fidelities, in study order, each scaled to [0, 1] over its domain.
std::vector<double> fidelity_features(const StudyDefinition &study, const FidelitySettings &f);

std::int64_t fidelity_value(const FidelitySettings &f, std::string_view name);

struct QueryResult {
  std::map<std::string, double> objectives;  // empty when infeasible
  bool feasible = true;
  std::string infeasibility_reason;
  std::string evaluation_id;
  std::string server_label;
  std::vector<double> raw_timings;  // seconds per iteration, one per repeat

  friend bool operator==(const QueryResult &, const QueryResult &) = default;
};

json result_to_json(const QueryResult &r);
QueryResult result_from_json(const json &j);

}  // namespace catbench
