#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "catbench/client.hpp"
#include "catbench/records.hpp"
#include "catbench/surrogate.hpp"

namespace catbench::optimize {

using Point = std::vector<double>;

// Fronts of indices into points, best first; minimization. Equal points share
// a front.
std::vector<std::vector<std::size_t>> non_dominated_sort(const std::vector<Point> &points);

bool dominates(const Point &a, const Point &b);

// Points holding the minimum or maximum of any objective get +inf; others sum
// the normalized gap between their nearest strictly smaller and strictly
// larger neighbours per objective. Objectives without spread are skipped.
// Independent of input order.
std::vector<double> crowding_distance(const std::vector<Point> &front);

// Closed-form expected improvement below best; sigma = 0 gives
// max(best - mean, 0).
double expected_improvement(double mean, double sigma, double best);
double constrained_ei(double mean, double sigma, double best, double p_feasible);

// Fraction of feasible labels among the k nearest observations.
class FeasibilityClassifier {
 public:
  FeasibilityClassifier(const space::SearchSpace &space, int k = 5) : space_(&space), k_(k) {}

  void add(const space::Configuration &config, bool feasible);
  // 1 when no infeasible observation exists.
  double probability(const space::Configuration &config) const;
  std::size_t size() const noexcept { return configs_.size(); }

 private:
  const space::SearchSpace *space_;
  int k_;
  std::vector<space::Configuration> configs_;
  std::vector<bool> feasible_;
  std::size_t infeasible_ = 0;
};

// One observation as optimizers see it. values is empty when infeasible.
struct Observation {
  space::Configuration config;
  Point values;
  bool feasible() const noexcept { return !values.empty(); }
};

// Objective vector of a result; nullopt when infeasible or an objective is
// missing or not finite.
std::optional<Point> objective_vector(const QueryResult &r, const std::vector<std::string> &objectives);

// Ask/tell state machine. ask() and tell() strictly alternate.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual std::string name() const = 0;
  virtual space::Configuration ask() = 0;
  virtual void tell(const space::Configuration &config, const QueryResult &result);

  const std::vector<Observation> &observations() const noexcept { return observations_; }

 protected:
  Optimizer(const StudyDefinition &study, std::vector<std::string> objectives, std::uint64_t seed);
  virtual void observed(const Observation &) {}

  const StudyDefinition &study_;
  std::vector<std::string> objectives_;
  std::uint64_t seed_;
  std::vector<Observation> observations_;
};

class RandomSearch : public Optimizer {
 public:
  RandomSearch(const StudyDefinition &study, std::vector<std::string> objectives, std::uint64_t seed,
               std::size_t budget);
  std::string name() const override { return "random_search"; }
  space::Configuration ask() override;

 private:
  std::vector<space::Configuration> plan_;
  std::size_t next_ = 0;
};

struct Nsga2Options {
  std::size_t population = 20;  // even, >= 4
  double crossover_rate = 0.9;
  int repair_attempts = 100;
};

class Nsga2 : public Optimizer {
 public:
  Nsga2(const StudyDefinition &study, std::vector<std::string> objectives, std::uint64_t seed,
        Nsga2Options options = {});
  std::string name() const override { return "nsga2"; }
  space::Configuration ask() override;

  std::size_t generation() const noexcept { return generation_; }

 private:
  struct Member {
    Observation obs;
    std::size_t rank = 0;
    double crowding = 0.0;
  };

  void observed(const Observation &obs) override;
  void advance();
  static void assign_ranks(std::vector<Member> &members);
  const Member &tournament();
  std::pair<space::Configuration, space::Configuration> vary(const space::Configuration &a,
                                                            const space::Configuration &b);
  void mutate(space::Configuration &c);
  space::Configuration fresh_valid();

  Nsga2Options options_;
  Rng rng_;
  std::vector<Member> parents_;
  std::vector<Observation> batch_results_;
  std::vector<space::Configuration> pending_;
  std::size_t issued_ = 0;
  std::size_t generation_ = 0;
};

struct ModelBasedOptions {
  std::size_t initial_design = 10;
  std::size_t pool_size = 1000;
  surrogate::ForestOptions forest{24, 10, 1, 1.0, true};
  double rho = 0.05;  // augmented Chebyshev term
  int feasibility_k = 5;
};

// Ensemble surrogate per objective plus a feasibility classifier; scores a
// pool of valid samples and incumbent neighbours with constrained EI on a
// random-weight Chebyshev scalarization.
class ModelBased : public Optimizer {
 public:
  ModelBased(const StudyDefinition &study, std::vector<std::string> objectives, std::uint64_t seed,
             ModelBasedOptions options = {});
  std::string name() const override { return "model_based"; }
  space::Configuration ask() override;

  // Index of the winning candidate. Exposed for tests: means[c][m] are
  // normalized predicted objectives, members[c][m][t] per-member values.
  struct Scored {
    std::vector<Point> means;
    std::vector<std::vector<Point>> members;
    std::vector<double> feasibility;
  };
  static std::size_t select(const Scored &scored, const Point &weights, const std::vector<Point> &observed,
                            double rho);

  std::size_t model_guided_queries() const noexcept { return guided_; }

 private:
  void observed(const Observation &obs) override;
  space::Configuration random_unseen();

  ModelBasedOptions options_;
  Rng rng_;
  std::vector<space::Configuration> initial_;
  FeasibilityClassifier classifier_;
  std::size_t asked_ = 0;
  std::size_t guided_ = 0;
};

// Augmented Chebyshev value of a normalized objective vector.
double chebyshev(const Point &z, const Point &weights, double rho);

std::unique_ptr<Optimizer> make_optimizer(const std::string &name, const StudyDefinition &study,
                                          std::vector<std::string> objectives, std::uint64_t seed,
                                          std::size_t budget, const json &hyperparameters);

const std::vector<std::string> &optimizer_names();

// Drives one (optimizer, seed) run to budget evaluations. Records already in
// `replay` are fed back without querying; a replayed configuration that
// differs from what the optimizer asks for raises invalid_argument.
std::vector<EvaluationRecord> run_optimizer(Optimizer &optimizer, Evaluator &evaluator, std::size_t budget,
                                            std::uint64_t seed, const FidelitySettings &fidelities,
                                            const std::vector<EvaluationRecord> &replay = {},
                                            const std::function<void(const EvaluationRecord &)> &on_record = {});

}  // namespace catbench::optimize
