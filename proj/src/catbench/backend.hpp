#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "catbench/evaluation.hpp"
#include "catbench/kernels.hpp"
#include "catbench/surrogate.hpp"

namespace catbench {

// Something that answers queries for one study. initialize() loads operands
// or fits a model; it does the work once and counts how often it did.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual const StudyDefinition &study() const = 0;
  virtual std::string_view kind() const = 0;

  void initialize();
  bool initialized() const noexcept { return initialized_; }
  int init_count() const noexcept { return init_count_; }

  // Initializes on first use. Throws InvalidConfigError for configurations the
  // backend refuses.
  QueryResult evaluate(const space::Configuration &config, const FidelitySettings &fidelities);

 protected:
  virtual void do_initialize() = 0;
  virtual QueryResult do_evaluate(const space::Configuration &config,
                                  const FidelitySettings &fidelities) = 0;

 private:
  bool initialized_ = false;
  int init_count_ = 0;
};

class KernelBackend : public Backend {
 public:
  explicit KernelBackend(StudyDefinition study, kernels::ExecuteOptions options = {});

  const StudyDefinition &study() const override { return study_; }
  std::string_view kind() const override { return "kernel"; }

 protected:
  void do_initialize() override;
  QueryResult do_evaluate(const space::Configuration &config, const FidelitySettings &fidelities) override;

 private:
  StudyDefinition study_;
  kernels::ExecuteOptions options_;
  std::unique_ptr<kernels::KernelExecutor> executor_;
};

// Predicts every study objective from a model fitted on a log. Only the
// parameter domains are checked: known constraints are not enforced and no
// fidelity waits are performed.
class SurrogateBackend : public Backend {
 public:
  SurrogateBackend(StudyDefinition study, std::filesystem::path log_path, std::uint64_t seed = 0,
                   surrogate::FitOptions options = {});
  // Serves an already fitted model.
  SurrogateBackend(StudyDefinition study, surrogate::SurrogateModel model);

  const StudyDefinition &study() const override { return study_; }
  std::string_view kind() const override { return "surrogate"; }
  const surrogate::SurrogateModel &model() const;

 protected:
  void do_initialize() override;
  QueryResult do_evaluate(const space::Configuration &config, const FidelitySettings &fidelities) override;

 private:
  StudyDefinition study_;
  std::filesystem::path log_path_;
  std::uint64_t seed_ = 0;
  surrogate::FitOptions options_;
  std::optional<surrogate::SurrogateModel> model_;
};

// "kernel" or "surrogate"; the surrogate backend needs a log.
std::unique_ptr<Backend> make_backend(const StudyDefinition &study, std::string_view kind,
                                      const std::optional<std::filesystem::path> &surrogate_log,
                                      std::uint64_t seed = 0);

}  // namespace catbench
