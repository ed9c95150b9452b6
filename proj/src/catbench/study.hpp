#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "catbench/space.hpp"

namespace catbench {

using json = nlohmann::json;

inline constexpr int kStudySchemaVersion = 1;

struct ObjectiveDescriptor {
  std::string name;
  std::string unit;
  std::string direction = "minimize";
};

struct FidelityDescriptor {
  std::string name;
  std::string unit;
  std::int64_t min = 0;
  std::int64_t max = 0;
  std::int64_t default_value = 0;
};

struct StudyMetadata {
  int objectives = 0;   // M
  int dimensions = 0;   // D
  int fidelities = 0;   // F
  std::optional<std::string> cardinality;  // |S|, decimal
  std::optional<double> valid_count;       // |V|, when known
  std::optional<double> valid_ratio;       // |V|/|S|, when known
  std::string hardware;
  // "computed" when |V| and the ratio were enumerated from this file's space,
  // "reported" when they were transcribed for reference.
  std::string valid_source = "computed";
};

// Execution settings for natively executed kernel studies.
struct KernelSettings {
  std::string kernel;  // gemm, stencil, asum, scal, spmv, spmm, sddmm, kmeans
  std::map<std::string, std::map<std::string, double>> size_presets;
  std::string preset = "default";
  std::uint64_t operand_seed = 0;
  std::int64_t scratch_budget_bytes = 0;
  std::int64_t llc_bytes = 0;
  int available_cores = 1;
  double oversubscription_factor = 1.0;
  std::string traffic_model;  // human-readable formula

  const std::map<std::string, double> &sizes() const;
};

struct StudyDefinition {
  std::string study_id;
  space::SearchSpace search_space;
  std::vector<ObjectiveDescriptor> objectives;
  std::vector<FidelityDescriptor> fidelities;
  std::string backend;  // "kernel" or "surrogate"
  StudyMetadata metadata;
  std::optional<KernelSettings> kernel;
  // The parsed source document, served verbatim over the wire.
  json document;

  const FidelityDescriptor *fidelity(std::string_view name) const;
  std::optional<std::size_t> objective_index(std::string_view name) const;
};

// Throws malformed_space (schema/content) or io.
StudyDefinition parse_study(const json &document);
StudyDefinition load_study(const std::filesystem::path &path);

// Bundled data directory: $CATBENCH_DATA_DIR, else the configured install path.
std::filesystem::path data_directory();
// Resolves a bundled study id ("gemm-cpu") to its file.
std::filesystem::path bundled_study_path(const std::string &study_id);
std::vector<std::filesystem::path> bundled_study_paths();

}  // namespace catbench
