#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "catbench/records.hpp"
#include "catbench/study.hpp"

namespace catbench::surrogate {

struct ForestOptions {
  int trees = 32;
  int max_depth = 12;
  int min_leaf = 2;               // minimum summed sample weight per leaf
  double feature_fraction = 1.0;  // features tried per split
  bool bootstrap = true;
};

class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
  };

  // weights are per-row multiplicities; rows with weight 0 are ignored.
  static RegressionTree fit(const std::vector<std::vector<double>> &x, const std::vector<double> &y,
                            const std::vector<double> &weights, const ForestOptions &options,
                            Rng &rng);
  double predict(const std::vector<double> &features) const;
  const std::vector<Node> &nodes() const noexcept { return nodes_; }

  json to_json() const;
  static RegressionTree from_json(const json &j);

 private:
  std::vector<Node> nodes_;
};

// Bagged regression trees; the spread of member predictions is the
// uncertainty estimate.
class Forest {
 public:
  static Forest fit(const std::vector<std::vector<double>> &x, const std::vector<double> &y,
                    const std::vector<double> &weights, const ForestOptions &options,
                    std::uint64_t seed);
  double predict(const std::vector<double> &features) const;
  std::vector<double> predict_members(const std::vector<double> &features) const;
  std::size_t size() const noexcept { return trees_.size(); }

  json to_json() const;
  static Forest from_json(const json &j);

 private:
  std::vector<RegressionTree> trees_;
};

// Weighted k-nearest-neighbour regression over (configuration, fidelities).
// Duplicate points are merged into one entry whose weight is the multiplicity
// and whose target is the mean.
class NearestNeighbors {
 public:
  struct Point {
    space::Configuration config;
    std::vector<double> fidelity_features;
    double target = 0.0;
    double weight = 1.0;
  };

  NearestNeighbors() = default;
  NearestNeighbors(const space::SearchSpace &space, std::vector<Point> points, int k);

  double predict(const space::Configuration &config, const std::vector<double> &fidelity_features) const;
  const std::vector<Point> &points() const noexcept { return points_; }
  int k() const noexcept { return k_; }

  // Mean of the configuration distance (weighted by parameter count) and
  // absolute fidelity-feature differences.
  double point_distance(const space::Configuration &config, const std::vector<double> &fidelity_features,
                        const Point &p) const;

 private:
  const space::SearchSpace *space_ = nullptr;
  std::vector<Point> points_;
  int k_ = 5;
};

enum class ModelKind { ensemble, knn };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

struct FitOptions {
  ModelKind kind = ModelKind::ensemble;
  ForestOptions forest;
  int knn_k = 5;
  bool log_target = false;  // fit log(y); requires positive targets
  std::size_t min_records = 10;
};

// Feature vector: encode(config) followed by fidelity_features.
std::vector<double> features(const StudyDefinition &study, const space::Configuration &config,
                             const FidelitySettings &fidelities);

// Per-objective regressors fitted on the feasible records of a log.
// Immutable after fit and safe for concurrent prediction.
class SurrogateModel {
 public:
  // Throws insufficient_data when fewer than options.min_records feasible
  // records carry every requested objective.
  static SurrogateModel fit(const StudyDefinition &study, const std::vector<EvaluationRecord> &records,
                            const std::vector<std::string> &objectives, std::uint64_t seed,
                            FitOptions options = {});

  // Always feasible; known constraints are not enforced.
  QueryResult predict(const space::Configuration &config, const FidelitySettings &fidelities) const;
  double predict(const std::string &objective, const space::Configuration &config,
                 const FidelitySettings &fidelities) const;
  // Per-member predictions (one entry in k-NN mode).
  std::vector<double> predict_members(const std::string &objective, const space::Configuration &config,
                                      const FidelitySettings &fidelities) const;

  const std::vector<std::string> &objectives() const noexcept { return objectives_; }
  const StudyDefinition &study() const noexcept { return *study_; }
  std::size_t record_count() const noexcept { return record_count_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const FitOptions &options() const noexcept { return options_; }

  // Self-contained document: study, options, and fitted regressors.
  json to_json() const;
  static SurrogateModel from_json(const json &j);

 private:
  struct Regressor {
    Forest forest;
    NearestNeighbors knn;
  };
  const Regressor &regressor(const std::string &objective) const;
  double untransform(double v) const;

  std::shared_ptr<const StudyDefinition> study_;
  std::vector<std::string> objectives_;
  std::map<std::string, Regressor> regressors_;
  FitOptions options_;
  std::size_t record_count_ = 0;
  std::uint64_t seed_ = 0;
};

// 1 - SS_res / SS_tot. Throws insufficient_data below two values and
// undefined_score when the targets have zero variance.
double r2(const std::vector<double> &predictions, const std::vector<double> &targets);

// R² of the model on the feasible holdout records carrying the objective.
double r2_score(const SurrogateModel &model, const std::vector<EvaluationRecord> &holdout,
                const std::string &objective);

}  // namespace catbench::surrogate
