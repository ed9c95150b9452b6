#include "catbench/backend.hpp"

#include "catbench/error.hpp"
#include "catbench/records.hpp"

namespace catbench {

void Backend::initialize() {
  if (initialized_) return;
  do_initialize();
  initialized_ = true;
  ++init_count_;
}

QueryResult Backend::evaluate(const space::Configuration &config, const FidelitySettings &fidelities) {
  initialize();
  return do_evaluate(config, fidelities);
}

KernelBackend::KernelBackend(StudyDefinition study, kernels::ExecuteOptions options)
    : study_(std::move(study)), options_(options) {
  if (!study_.kernel)
    throw Error(ErrorCode::invalid_argument,
                "study '" + study_.study_id + "' has no kernel settings and cannot run natively");
}

void KernelBackend::do_initialize() {
  executor_ = std::make_unique<kernels::KernelExecutor>(study_, options_);
}

QueryResult KernelBackend::do_evaluate(const space::Configuration &config,
                                       const FidelitySettings &fidelities) {
  return executor_->execute(config, fidelities);
}

SurrogateBackend::SurrogateBackend(StudyDefinition study, std::filesystem::path log_path,
                                   std::uint64_t seed, surrogate::FitOptions options)
    : study_(std::move(study)), log_path_(std::move(log_path)), seed_(seed), options_(options) {
  if (!std::filesystem::exists(log_path_))
    throw Error(ErrorCode::io, "surrogate log " + log_path_.string() + " does not exist");
}

SurrogateBackend::SurrogateBackend(StudyDefinition study, surrogate::SurrogateModel model)
    : study_(std::move(study)), model_(std::move(model)) {}

const surrogate::SurrogateModel &SurrogateBackend::model() const {
  if (!model_) throw Error(ErrorCode::internal, "surrogate backend is not initialized");
  return *model_;
}

void SurrogateBackend::do_initialize() {
  if (model_) return;
  auto records = read_log(log_path_, study_.search_space);
  std::erase_if(records, [&](const EvaluationRecord &r) { return r.study_id != study_.study_id; });
  if (records.empty())
    throw Error(ErrorCode::insufficient_data,
                "log " + log_path_.string() + " has no records for study '" + study_.study_id + "'");
  std::vector<std::string> objectives;
  for (const auto &o : study_.objectives) objectives.push_back(o.name);
  model_ = surrogate::SurrogateModel::fit(study_, records, objectives, seed_, options_);
}

QueryResult SurrogateBackend::do_evaluate(const space::Configuration &config,
                                          const FidelitySettings &fidelities) {
  study_.search_space.check_domain(config);
  return model_->predict(config, fidelities);
}

std::unique_ptr<Backend> make_backend(const StudyDefinition &study, std::string_view kind,
                                      const std::optional<std::filesystem::path> &surrogate_log,
                                      std::uint64_t seed) {
  if (kind == "kernel") return std::make_unique<KernelBackend>(study);
  if (kind == "surrogate") {
    if (!surrogate_log)
      throw Error(ErrorCode::invalid_argument, "the surrogate backend requires a surrogate log");
    surrogate::FitOptions options;
    options.log_target = true;
    return std::make_unique<SurrogateBackend>(study, *surrogate_log, seed, options);
  }
  throw Error(ErrorCode::invalid_argument,
              "unknown backend '" + std::string(kind) + "' (expected kernel or surrogate)");
}

}  // namespace catbench
