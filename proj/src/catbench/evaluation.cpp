#include "catbench/evaluation.hpp"

#include "catbench/error.hpp"

namespace catbench {

namespace {

std::int64_t *slot(FidelitySettings &f, std::string_view name) {
  if (name == kFidelityIterations) return &f.iterations;
  if (name == kFidelityRepeats) return &f.repeats;
  if (name == kFidelityWaitBetween) return &f.wait_between_repeats_ms;
  if (name == kFidelityWaitAfter) return &f.wait_after_evaluation_ms;
  return nullptr;
}

}  // namespace

std::int64_t fidelity_value(const FidelitySettings &f, std::string_view name) {
  auto *p = slot(const_cast<FidelitySettings &>(f), name);
  if (!p) throw Error(ErrorCode::invalid_argument, "unknown fidelity '" + std::string(name) + "'");
  return *p;
}

FidelitySettings default_fidelities(const StudyDefinition &study) {
  FidelitySettings f;
  for (const auto &d : study.fidelities)
    if (auto *p = slot(f, d.name)) *p = d.default_value;
  return f;
}

FidelitySettings resolve_fidelities(const StudyDefinition &study, const json &object) {
  FidelitySettings f = default_fidelities(study);
  if (object.is_null()) return f;
  if (!object.is_object()) throw InvalidConfigError("fidelities must be an object");
  for (auto it = object.begin(); it != object.end(); ++it) {
    const auto *d = study.fidelity(it.key());
    if (!d) throw InvalidConfigError("fidelity '" + it.key() + "' is not declared by the study");
    if (!it->is_number_integer())
      throw InvalidConfigError("fidelity '" + it.key() + "' must be an integer");
    const auto v = it->get<std::int64_t>();
    if (v < d->min || v > d->max)
      throw InvalidConfigError("fidelity '" + it.key() + "' = " + std::to_string(v) +
                               " is outside [" + std::to_string(d->min) + ", " +
                               std::to_string(d->max) + "]");
    if (auto *p = slot(f, it.key())) *p = v;
  }
  return f;
}

json fidelities_to_json(const StudyDefinition &study, const FidelitySettings &f) {
  json out = json::object();
  for (const auto &d : study.fidelities)
    if (auto *p = slot(const_cast<FidelitySettings &>(f), d.name)) out[d.name] = *p;
  return out;
}

std::vector<double> fidelity_features(const StudyDefinition &study, const FidelitySettings &f) {
  std::vector<double> out;
  out.reserve(study.fidelities.size());
  for (const auto &d : study.fidelities) {
    const auto *p = slot(const_cast<FidelitySettings &>(f), d.name);
    const double v = p ? static_cast<double>(*p) : static_cast<double>(d.default_value);
    const double span = static_cast<double>(d.max - d.min);
    out.push_back(span > 0 ? (v - static_cast<double>(d.min)) / span : 0.0);
  }
  return out;
}

json result_to_json(const QueryResult &r) {
  json j{{"evaluation_id", r.evaluation_id},
         {"feasible", r.feasible},
         {"objectives", r.objectives},
         {"raw_timings", r.raw_timings},
         {"server_label", r.server_label}};
  if (!r.feasible) j["infeasibility_reason"] = r.infeasibility_reason;
  return j;
}

QueryResult result_from_json(const json &j) {
  QueryResult r;
  try {
    r.evaluation_id = j.value("evaluation_id", std::string());
    r.feasible = j.at("feasible").get<bool>();
    r.objectives = j.value("objectives", std::map<std::string, double>{});
    r.raw_timings = j.value("raw_timings", std::vector<double>{});
    r.server_label = j.value("server_label", std::string());
    r.infeasibility_reason = j.value("infeasibility_reason", std::string());
  } catch (const json::exception &e) {
    throw Error(ErrorCode::parse, std::string("query result: ") + e.what());
  }
  return r;
}

}  // namespace catbench
