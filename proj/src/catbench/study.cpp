#include "catbench/study.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

#include "catbench/error.hpp"

#ifndef CATBENCH_DATA_DIR
#define CATBENCH_DATA_DIR "data"
#endif

namespace catbench {

namespace {

[[noreturn]] void malformed(const std::string &what) {
  throw Error(ErrorCode::malformed_space, "study definition: " + what);
}

template <class T>
void check_unique(const std::vector<T> &items, const char *what) {
  std::set<std::string> names;
  for (const auto &i : items)
    if (!names.insert(i.name).second) malformed(std::string("duplicate ") + what + " '" + i.name + "'");
}

KernelSettings parse_kernel(const json &j) {
  KernelSettings k;
  k.kernel = j.at("id").get<std::string>();
  for (auto it = j.at("size_presets").begin(); it != j.at("size_presets").end(); ++it)
    k.size_presets[it.key()] = it->get<std::map<std::string, double>>();
  k.preset = j.value("preset", std::string("default"));
  k.operand_seed = j.value("operand_seed", std::uint64_t{0});
  k.scratch_budget_bytes = j.value("scratch_budget_bytes", std::int64_t{0});
  k.llc_bytes = j.value("llc_bytes", std::int64_t{8 << 20});
  k.available_cores = j.value("available_cores", 1);
  k.oversubscription_factor = j.value("oversubscription_factor", 1.0);
  k.traffic_model = j.value("traffic_model", std::string());
  if (!k.size_presets.count(k.preset)) malformed("kernel preset '" + k.preset + "' is not declared");
  if (k.available_cores < 1) malformed("available_cores must be >= 1");
  return k;
}

}  // namespace

const std::map<std::string, double> &KernelSettings::sizes() const {
  auto it = size_presets.find(preset);
  if (it == size_presets.end())
    throw Error(ErrorCode::invalid_argument, "unknown size preset '" + preset + "'");
  return it->second;
}

const FidelityDescriptor *StudyDefinition::fidelity(std::string_view name) const {
  for (const auto &f : fidelities)
    if (f.name == name) return &f;
  return nullptr;
}

std::optional<std::size_t> StudyDefinition::objective_index(std::string_view name) const {
  for (std::size_t i = 0; i < objectives.size(); ++i)
    if (objectives[i].name == name) return i;
  return std::nullopt;
}

StudyDefinition parse_study(const json &document) {
  StudyDefinition s;
  try {
    const int version = document.at("schema_version").get<int>();
    if (version != kStudySchemaVersion)
      malformed("unsupported schema_version " + std::to_string(version));
    s.study_id = document.at("study_id").get<std::string>();
    s.search_space = space::SearchSpace::from_json(document.at("search_space"));
    for (const auto &o : document.at("objectives")) {
      ObjectiveDescriptor d;
      d.name = o.at("name").get<std::string>();
      d.unit = o.value("unit", std::string());
      d.direction = o.value("direction", std::string("minimize"));
      if (d.direction != "minimize") malformed("objective '" + d.name + "' must be minimized");
      s.objectives.push_back(std::move(d));
    }
    for (const auto &f : document.at("fidelities")) {
      FidelityDescriptor d;
      d.name = f.at("name").get<std::string>();
      d.unit = f.value("unit", std::string());
      d.min = f.at("min").get<std::int64_t>();
      d.max = f.at("max").get<std::int64_t>();
      d.default_value = f.at("default").get<std::int64_t>();
      if (d.min > d.max || d.default_value < d.min || d.default_value > d.max)
        malformed("fidelity '" + d.name + "' has an inconsistent domain");
      s.fidelities.push_back(std::move(d));
    }
    s.backend = document.at("backend").get<std::string>();
    if (s.backend != "kernel" && s.backend != "surrogate")
      malformed("backend must be 'kernel' or 'surrogate'");

    const auto &m = document.at("metadata");
    s.metadata.objectives = m.at("M").get<int>();
    s.metadata.dimensions = m.at("D").get<int>();
    s.metadata.fidelities = m.at("F").get<int>();
    if (m.contains("cardinality")) s.metadata.cardinality = m.at("cardinality").get<std::string>();
    if (m.contains("valid_count")) s.metadata.valid_count = m.at("valid_count").get<double>();
    if (m.contains("valid_ratio")) s.metadata.valid_ratio = m.at("valid_ratio").get<double>();
    s.metadata.hardware = m.value("hardware", std::string());
    s.metadata.valid_source = m.value("valid_source", std::string("computed"));

    if (document.contains("kernel")) s.kernel = parse_kernel(document.at("kernel"));
  } catch (const json::exception &e) {
    malformed(e.what());
  }

  if (s.objectives.empty()) malformed("at least one objective is required");
  check_unique(s.objectives, "objective");
  check_unique(s.fidelities, "fidelity");
  if (s.metadata.objectives != static_cast<int>(s.objectives.size()))
    malformed("metadata M does not match the objective list");
  if (s.metadata.fidelities != static_cast<int>(s.fidelities.size()))
    malformed("metadata F does not match the fidelity list");
  if (s.metadata.dimensions != static_cast<int>(s.search_space.dimensions()))
    malformed("metadata D does not match the parameter count");
  if (s.metadata.cardinality && *s.metadata.cardinality != space::cardinality(s.search_space).str())
    malformed("metadata cardinality does not match the search space");
  if (s.backend == "kernel" && !s.kernel) malformed("kernel backend requires a 'kernel' block");
  s.document = document;
  return s;
}

StudyDefinition load_study(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open study file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception &e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
  return parse_study(doc);
}

std::filesystem::path data_directory() {
  if (const char *env = std::getenv("CATBENCH_DATA_DIR"); env && *env) return env;
  return CATBENCH_DATA_DIR;
}

std::filesystem::path bundled_study_path(const std::string &study_id) {
  auto p = data_directory() / "studies" / (study_id + ".json");
  if (!std::filesystem::exists(p))
    throw Error(ErrorCode::io, "no bundled study '" + study_id + "' under " + p.parent_path().string());
  return p;
}

std::vector<std::filesystem::path> bundled_study_paths() {
  std::vector<std::filesystem::path> out;
  const auto dir = data_directory() / "studies";
  if (!std::filesystem::exists(dir)) return out;
  for (const auto &e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace catbench
