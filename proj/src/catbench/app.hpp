#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "catbench/records.hpp"
#include "catbench/study.hpp"

namespace catbench::app {

// An existing file path, else a bundled study id.
StudyDefinition resolve_study(const std::string &study);

// Study of a log, from its first record's study_id. Throws no_records for an
// empty log.
StudyDefinition study_of_log(const std::filesystem::path &log);

struct RunManifest {
  std::string study;  // file path or bundled id; may be empty when servers are given
  std::string backend = "kernel";
  std::optional<std::string> surrogate_log;
  std::uint64_t surrogate_seed = 0;
  std::vector<std::string> optimizers;
  json hyperparameters = json::object();
  std::size_t budget = 0;
  std::vector<std::uint64_t> seeds;
  json fidelities = json::object();
  std::vector<std::string> servers;  // host:port; empty runs the backend in-process
  std::string log;
  std::vector<std::string> objectives;  // empty means every study objective
};

// Throws invalid_argument for missing fields, duplicate seeds, or referenced
// input files that do not exist.
RunManifest parse_manifest(const json &document);
json manifest_to_json(const RunManifest &m);

struct RunSummary {
  std::size_t evaluated = 0;
  std::size_t replayed = 0;
  std::size_t skipped_runs = 0;  // (optimizer, seed) pairs already complete
  std::vector<std::string> server_labels;
};

// Appends one record per evaluation to the manifest's log. Complete
// (optimizer, seed) pairs found in an existing log are skipped; partial ones
// are replayed and continued.
RunSummary run(const RunManifest &manifest);

struct Analysis {
  std::string table;  // tab-separated, one header line
  json summary = json::object();
};

// subcommand: trajectory, hypervolume, speedup, importance, pareto.
// options: study, objective, objectives, ref, baseline, bins, rounds, seed,
// holdout_fraction.
Analysis analyze(const std::string &subcommand, const std::filesystem::path &log, const json &options);

// subcommand: fit (writes options.out) or r2.
Analysis surrogate_command(const std::string &subcommand, const json &options);

}  // namespace catbench::app
