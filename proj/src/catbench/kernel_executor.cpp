#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "catbench/error.hpp"
#include "catbench/kernels.hpp"

namespace catbench::kernels {

namespace {

std::mutex &execution_mutex() {
  static std::mutex m;
  return m;
}

bool contains(const std::vector<std::int64_t> &values, std::int64_t v) {
  return std::find(values.begin(), values.end(), v) != values.end();
}

bool contains(const std::vector<std::string> &labels, const std::string &v) {
  return std::find(labels.begin(), labels.end(), v) != labels.end();
}

void sleep_ms(std::int64_t ms) {
  if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

}  // namespace

space::Configuration default_config(const space::SearchSpace &space) {
  space::Configuration config;
  for (const auto &p : space.parameters()) {
    switch (p.kind) {
      case space::ParamKind::ordinal: {
        std::int64_t v = p.values.front();
        const bool zero_default = p.name.rfind("tile_", 0) == 0 || p.name == "chunk";
        const bool one_default = p.name == "threads" || p.name == "unroll";
        if (zero_default && contains(p.values, 0)) v = 0;
        if (one_default && contains(p.values, 1)) v = 1;
        config.values.emplace_back(v);
        break;
      }
      case space::ParamKind::categorical: {
        std::string v = p.labels.front();
        if (p.name == "unroll" && contains(p.labels, "false")) v = "false";
        if (p.name == "schedule" && contains(p.labels, "static")) v = "static";
        config.values.emplace_back(v);
        break;
      }
      case space::ParamKind::permutation: {
        space::Permutation identity(p.perm_size);
        for (int i = 0; i < p.perm_size; ++i) identity[i] = i;
        config.values.emplace_back(std::move(identity));
        break;
      }
    }
  }
  return config;
}

space::Configuration list_default_config(std::string_view kernel) {
  parse_kernel_id(kernel);
  const auto study = load_study(bundled_study_path(std::string(kernel) + "-cpu"));
  return default_config(study.search_space);
}

std::optional<std::string> hidden_violation(const KernelSettings &settings,
                                            const TuningKnobs &knobs, int cores) {
  if (settings.scratch_budget_bytes > 0) {
    double bytes = 8.0;
    for (auto t : {knobs.tile_i, knobs.tile_j, knobs.tile_k})
      if (t > 0) bytes *= static_cast<double>(t);
    if (bytes > static_cast<double>(settings.scratch_budget_bytes)) return "scratch overflow";
  }
  if (knobs.threads > cores * settings.oversubscription_factor) return "thread oversubscription";
  return std::nullopt;
}

int available_cores(const KernelSettings &settings) {
  if (const char *env = std::getenv("CATBENCH_CORES")) {
    char *end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  return settings.available_cores;
}

KernelExecutor::KernelExecutor(const StudyDefinition &study, ExecuteOptions options)
    : study_(study), options_(options) {
  if (!study.kernel) throw Error(ErrorCode::malformed_space, "study '" + study.study_id + "' has no kernel block");
  settings_ = *study.kernel;
  kernel_ = parse_kernel_id(settings_.kernel);
  for (const auto &o : study.objectives)
    if (o.name != "runtime_seconds" && o.name != "memory_traffic_bytes")
      throw Error(ErrorCode::malformed_space, "kernel studies cannot measure objective '" + o.name + "'");
  problem_ = generate_problem(kernel_, settings_.sizes(), settings_.operand_seed);
  const auto flush_bytes = std::max<std::int64_t>(4 * settings_.llc_bytes, 0);
  flush_buffer_.assign(static_cast<std::size_t>(flush_bytes / 8), 0.0);
}

const std::vector<double> &KernelExecutor::reference() {
  if (reference_.empty()) reference_ = compute_reference(problem_);
  return reference_;
}

void KernelExecutor::flush_cache() {
  double v = static_cast<double>(flush_buffer_.size());
  for (auto &e : flush_buffer_) e = (v += 1.0);
}

QueryResult KernelExecutor::execute(const space::Configuration &config,
                                    const FidelitySettings &fidelities) {
  std::lock_guard lock(execution_mutex());
  const auto &space = study_.search_space;
  space.check_domain(config);
  const auto verdict = validate(space, config);
  if (!verdict.valid)
    throw InvalidConfigError("configuration violates known constraints", verdict.violated);
  if (fidelities.iterations < 1 || fidelities.repeats < 1 || fidelities.wait_between_repeats_ms < 0 ||
      fidelities.wait_after_evaluation_ms < 0)
    throw InvalidConfigError("fidelity values out of range", {});

  const auto knobs = decode_knobs(space, config);
  QueryResult result;
  if (auto reason = hidden_violation(settings_, knobs, available_cores(settings_))) {
    result.feasible = false;
    result.infeasibility_reason = *reason;
    sleep_ms(fidelities.wait_after_evaluation_ms);
    return result;
  }

  using clock = std::chrono::steady_clock;
  for (std::int64_t rep = 0; rep < fidelities.repeats; ++rep) {
    if (rep > 0) sleep_ms(fidelities.wait_between_repeats_ms);
    flush_cache();
    const auto start = clock::now();
    for (std::int64_t it = 0; it < fidelities.iterations; ++it) run_tuned(problem_, knobs, output_);
    const std::chrono::duration<double> elapsed = clock::now() - start;
    result.raw_timings.push_back(elapsed.count() / static_cast<double>(fidelities.iterations));
  }
  if (options_.verify_output) {
    const double err = relative_error(output_, reference());
    if (!(err <= options_.verify_tolerance))
      throw Error(ErrorCode::internal, "tuned output deviates from reference (relative error " +
                                           std::to_string(err) + ") for " + space.describe(config));
  }

  auto sorted = result.raw_timings;
  std::sort(sorted.begin(), sorted.end());
  const auto mid = sorted.size() / 2;
  const double median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  for (const auto &o : study_.objectives) {
    if (o.name == "runtime_seconds") result.objectives[o.name] = median;
    else result.objectives[o.name] = traffic_model(kernel_, knobs, {settings_.sizes(), settings_.llc_bytes});
  }
  sleep_ms(fidelities.wait_after_evaluation_ms);
  return result;
}

}  // namespace catbench::kernels
