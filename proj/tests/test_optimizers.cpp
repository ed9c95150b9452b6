#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "catbench/client.hpp"
#include "catbench/error.hpp"
#include "catbench/metrics.hpp"
#include "catbench/optimizers.hpp"
#include "test_support.hpp"

using namespace catbench;
using namespace catbench::optimize;

namespace {

const std::vector<std::string> kBoth = {"runtime_seconds", "memory_traffic_bytes"};
const std::vector<std::string> kRuntime = {"runtime_seconds"};

StudyDefinition study(const std::string &id) { return parse_study(testing_support::study_document(id)); }

// Evaluates a closed-form function of the encoded configuration; nullopt
// marks a hidden-infeasible point.
class FunctionEvaluator : public Evaluator {
 public:
  using Fn = std::function<std::optional<Point>(const std::vector<double> &)>;
  FunctionEvaluator(StudyDefinition s, Fn fn) : study_(std::move(s)), fn_(std::move(fn)) {}
  const StudyDefinition &study() const override { return study_; }
  QueryResult evaluate(const space::Configuration &config, const FidelitySettings &) override {
    ++calls;
    if (!space::validate(study_.search_space, config).valid) ++invalid_queries;
    QueryResult r;
    const auto v = fn_(space::encode(study_.search_space, config));
    if (!v) {
      r.feasible = false;
      r.infeasibility_reason = "synthetic";
      return r;
    }
    r.objectives = {{"runtime_seconds", (*v)[0]}, {"memory_traffic_bytes", v->size() > 1 ? (*v)[1] : 0.0}};
    r.evaluation_id = "fn-" + std::to_string(calls);
    return r;
  }
  int calls = 0;
  int invalid_queries = 0;

 private:
  StudyDefinition study_;
  Fn fn_;
};

double sq_dist(const std::vector<double> &v, double target) {
  double s = 0;
  for (double x : v) s += (x - target) * (x - target);
  return s;
}

std::optional<Point> separable(const std::vector<double> &v) { return Point{sq_dist(v, 0.2), sq_dist(v, 0.8)}; }

std::optional<Point> single(const std::vector<double> &v) {
  double s = 0;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i + 1) * std::abs(v[i] - (i % 3 == 0 ? 1.0 : 0.0));
  return Point{1.0 + s};
}

// Brute-force fronts: repeatedly peel the points nobody left dominates.
std::vector<std::set<std::size_t>> peel_fronts(const std::vector<Point> &points) {
  std::vector<std::set<std::size_t>> fronts;
  std::set<std::size_t> left;
  for (std::size_t i = 0; i < points.size(); ++i) left.insert(i);
  while (!left.empty()) {
    std::set<std::size_t> front;
    for (auto i : left) {
      bool dominated = false;
      for (auto j : left) {
        bool all_le = true, any_lt = false;
        for (std::size_t m = 0; m < points[i].size(); ++m) {
          all_le = all_le && points[j][m] <= points[i][m];
          any_lt = any_lt || points[j][m] < points[i][m];
        }
        dominated = dominated || (all_le && any_lt);
      }
      if (!dominated) front.insert(i);
    }
    for (auto i : front) left.erase(i);
    fronts.push_back(front);
  }
  return fronts;
}

std::vector<Point> random_points(Rng &rng, std::size_t n, std::size_t m, int levels) {
  std::vector<Point> pts(n, Point(m));
  for (auto &p : pts)
    for (auto &x : p) x = static_cast<double>(rng.index(levels));
  return pts;
}

// Simpson integration of max(best - y, 0) against the normal density.
double ei_by_integration(double mean, double sigma, double best) {
  const double lo = mean - 12 * sigma;
  if (best <= lo) return 0.0;
  const int n = 200'000;
  const double h = (best - lo) / n;
  auto f = [&](double y) {
    const double z = (y - mean) / sigma;
    return (best - y) * std::exp(-0.5 * z * z) / (sigma * std::sqrt(2 * M_PI));
  };
  double s = f(lo) + f(best);
  for (int i = 1; i < n; ++i) s += f(lo + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

std::vector<Point> feasible_values(const std::vector<EvaluationRecord> &records) {
  std::vector<Point> out;
  for (const auto &r : records)
    if (auto v = objective_vector(r.result, kBoth)) out.push_back(*v);
  return out;
}

double final_best(const std::vector<EvaluationRecord> &records) {
  return metrics::incumbent_trajectory(records, "runtime_seconds").back().value();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<EvaluationRecord> run(const std::string &name, FunctionEvaluator &ev, std::size_t budget,
                                  std::uint64_t seed, const std::vector<std::string> &objectives,
                                  const json &hp = json::object()) {
  auto opt = make_optimizer(name, ev.study(), objectives, seed, budget, hp);
  return run_optimizer(*opt, ev, budget, seed, {});
}

}  // namespace

TEST(NonDominatedSort, HandExample) {
  const auto fronts = non_dominated_sort({{1, 1}, {1, 2}, {2, 1}, {2, 2}});
  ASSERT_EQ(fronts.size(), 3u);
  EXPECT_EQ(fronts[0], std::vector<std::size_t>{0});
  EXPECT_EQ(std::set<std::size_t>(fronts[1].begin(), fronts[1].end()), (std::set<std::size_t>{1, 2}));
  EXPECT_EQ(fronts[2], std::vector<std::size_t>{3});
}

TEST(NonDominatedSort, SinglePoint) {
  const auto fronts = non_dominated_sort({{3, 4, 5}});
  ASSERT_EQ(fronts.size(), 1u);
  EXPECT_EQ(fronts[0], std::vector<std::size_t>{0});
}

TEST(NonDominatedSort, EmptyAndMismatchedInput) {
  EXPECT_TRUE(non_dominated_sort({}).empty());
  EXPECT_THROW(non_dominated_sort({{1, 2}, {1}}), Error);
}

TEST(NonDominatedSort, EqualPointsShareFront) {
  const auto fronts = non_dominated_sort({{1, 1}, {1, 1}, {0, 2}});
  ASSERT_EQ(fronts.size(), 1u);
  EXPECT_EQ(fronts[0].size(), 3u);
}

TEST(NonDominatedSort, MatchesBruteForceOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto pts = random_points(rng, 50, 2 + trial % 3, trial % 2 ? 6 : 1000);
    const auto fronts = non_dominated_sort(pts);
    const auto oracle = peel_fronts(pts);
    ASSERT_EQ(fronts.size(), oracle.size());
    for (std::size_t r = 0; r < fronts.size(); ++r)
      EXPECT_EQ(std::set<std::size_t>(fronts[r].begin(), fronts[r].end()), oracle[r]);
  }
}

TEST(NonDominatedSort, FrontProperties) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pts = random_points(rng, 40, 2, 8);
    const auto fronts = non_dominated_sort(pts);
    std::vector<std::size_t> all;
    for (const auto &f : fronts) all.insert(all.end(), f.begin(), f.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) ASSERT_EQ(all[i], i);
    for (std::size_t r = 0; r < fronts.size(); ++r) {
      for (auto a : fronts[r])
        for (auto b : fronts[r]) EXPECT_FALSE(dominates(pts[a], pts[b]));
      if (r == 0) continue;
      for (auto a : fronts[r])
        EXPECT_TRUE(std::any_of(fronts[r - 1].begin(), fronts[r - 1].end(),
                                [&](std::size_t b) { return dominates(pts[b], pts[a]); }));
    }
  }
}

TEST(Crowding, TwoPointsAreInfinite) {
  const auto d = crowding_distance({{0, 1}, {1, 0}});
  EXPECT_TRUE(std::isinf(d[0]));
  EXPECT_TRUE(std::isinf(d[1]));
}

TEST(Crowding, CollinearMiddlePoint) {
  const auto d = crowding_distance({{0, 2}, {1, 1}, {2, 0}});
  EXPECT_TRUE(std::isinf(d[0]));
  EXPECT_DOUBLE_EQ(d[1], 2.0);
  EXPECT_TRUE(std::isinf(d[2]));
}

TEST(Crowding, InvariantToInputOrder) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    auto pts = random_points(rng, 12, 2 + trial % 2, trial % 3 ? 5 : 1000);
    const auto base = crowding_distance(pts);
    std::vector<std::size_t> perm(pts.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<Point> shuffled;
    for (auto i : perm) shuffled.push_back(pts[i]);
    const auto d = crowding_distance(shuffled);
    for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_DOUBLE_EQ(d[i], base[perm[i]]);
  }
}

TEST(Crowding, DegenerateObjectiveIgnored) {
  const auto d = crowding_distance({{0, 5}, {1, 5}, {2, 5}});
  EXPECT_TRUE(std::isinf(d[0]));
  EXPECT_DOUBLE_EQ(d[1], 1.0);
}

TEST(ExpectedImprovement, StandardNormalAtBest) {
  EXPECT_NEAR(expected_improvement(0, 1, 0), 0.3989422804014327, 1e-12);
  EXPECT_NEAR(expected_improvement(0, 1, 0), ei_by_integration(0, 1, 0), 1e-9);
}

TEST(ExpectedImprovement, MatchesIntegrationOracle) {
  for (const auto &[mean, sigma, best] :
       std::vector<std::tuple<double, double, double>>{{0.5, 0.2, 0.3}, {-1, 2, 0}, {3, 0.5, 3.2}, {0, 1, -2}}) {
    EXPECT_NEAR(expected_improvement(mean, sigma, best), ei_by_integration(mean, sigma, best), 1e-8);
  }
}

TEST(ExpectedImprovement, ZeroSigmaIsPositivePart) {
  EXPECT_DOUBLE_EQ(expected_improvement(2, 0, 3), 1.0);
  EXPECT_DOUBLE_EQ(expected_improvement(4, 0, 3), 0.0);
  EXPECT_THROW(expected_improvement(0, -1, 0), Error);
}

TEST(ConstrainedEi, EdgeCases) {
  EXPECT_DOUBLE_EQ(constrained_ei(0, 1, 0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(constrained_ei(1, 0, 2, 0.3), 0.3);
  EXPECT_THROW(constrained_ei(0, 1, 0, 1.5), Error);
  EXPECT_THROW(constrained_ei(0, 1, 0, -0.1), Error);
}

TEST(ConstrainedEi, MonotoneInFeasibilityAndSigma) {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double best = rng.uniform(-1, 1), mean = best + rng.uniform(0, 2);
    const double s1 = rng.uniform(0, 2), s2 = s1 + rng.uniform(0, 2);
    const double p1 = rng.uniform(), p2 = p1 + (1 - p1) * rng.uniform();
    EXPECT_LE(constrained_ei(mean, s1, best, p1), constrained_ei(mean, s1, best, p2) + 1e-15);
    EXPECT_LE(constrained_ei(mean, s1, best, p1), constrained_ei(mean, s2, best, p1) + 1e-15);
  }
}

TEST(FeasibilityClassifier, OneWithoutInfeasibleObservations) {
  const auto s = study("gemm-cpu");
  FeasibilityClassifier c(s.search_space);
  const auto configs = space::sample_valid(s.search_space, 1, 20);
  EXPECT_DOUBLE_EQ(c.probability(configs[0]), 1.0);
  for (const auto &x : configs) c.add(x, true);
  for (const auto &x : configs) EXPECT_DOUBLE_EQ(c.probability(x), 1.0);
}

TEST(FeasibilityClassifier, FractionOfNeighbours) {
  const space::SearchSpace s({space::ParameterDef::ordinal("a", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9})});
  FeasibilityClassifier c(s, 5);
  for (std::int64_t v = 0; v < 10; ++v) c.add(space::Configuration{{v}}, v < 5);
  EXPECT_DOUBLE_EQ(c.probability(space::Configuration{{std::int64_t{0}}}), 1.0);
  EXPECT_DOUBLE_EQ(c.probability(space::Configuration{{std::int64_t{9}}}), 0.0);
  for (std::int64_t v = 0; v < 10; ++v) {
    const double p = c.probability(space::Configuration{{v}});
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(RandomSearch, BudgetOfOne) {
  FunctionEvaluator ev(study("gemm-cpu"), separable);
  EXPECT_EQ(run("random_search", ev, 1, 3, kBoth).size(), 1u);
  EXPECT_EQ(ev.calls, 1);
}

TEST(RandomSearch, DeterministicConfigSequence) {
  FunctionEvaluator ev(study("gemm-cpu"), separable);
  const auto a = run("random_search", ev, 30, 4, kBoth), b = run("random_search", ev, 30, 4, kBoth);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].config, b[i].config);
}

TEST(RandomSearch, RejectsZeroBudget) {
  const auto s = study("gemm-cpu");
  EXPECT_THROW(RandomSearch(s, kBoth, 1, 0), Error);
}

TEST(Optimizers, OnlyQueryKnownValidConfigurations) {
  for (const auto &name : optimizer_names()) {
    FunctionEvaluator ev(study("spmm-cpu"), [](const std::vector<double> &v) -> std::optional<Point> {
      if (v[0] > 0.9) return std::nullopt;
      return separable(v);
    });
    const auto records = run(name, ev, 60, 1, kBoth, name == "nsga2" ? json{{"population", 10}} : json::object());
    EXPECT_EQ(records.size(), 60u) << name;
    EXPECT_EQ(ev.invalid_queries, 0) << name;
  }
}

TEST(Optimizers, RecordsCarryRunMetadata) {
  FunctionEvaluator ev(study("gemm-cpu"), separable);
  const auto records = run("nsga2", ev, 12, 7, kBoth, json{{"population", 4}});
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(records[i].optimizer, "nsga2");
    EXPECT_EQ(records[i].seed, 7u);
    EXPECT_EQ(records[i].iteration, static_cast<std::int64_t>(i));
    EXPECT_EQ(records[i].study_id, "gemm-cpu");
  }
}

TEST(Optimizers, UnknownNameOrHyperparameter) {
  const auto s = study("gemm-cpu");
  EXPECT_THROW(make_optimizer("bayes", s, kBoth, 0, 10, json::object()), Error);
  EXPECT_THROW(make_optimizer("nsga2", s, kBoth, 0, 10, json{{"populaton", 10}}), Error);
  EXPECT_THROW(make_optimizer("nsga2", s, kBoth, 0, 10, json{{"population", 2.5}}), Error);
  EXPECT_THROW(make_optimizer("random_search", s, {"energy"}, 0, 10, json::object()), Error);
}

TEST(Nsga2, PopulationMustBeEvenAndAtLeastFour) {
  const auto s = study("gemm-cpu");
  EXPECT_THROW(Nsga2(s, kBoth, 0, Nsga2Options{5}), Error);
  EXPECT_THROW(Nsga2(s, kBoth, 0, Nsga2Options{2}), Error);
  EXPECT_NO_THROW(Nsga2(s, kBoth, 0, Nsga2Options{4}));
}

TEST(Nsga2, AllInfeasibleStillProgresses) {
  FunctionEvaluator ev(study("gemm-cpu"), [](const std::vector<double> &) { return std::optional<Point>(); });
  Nsga2 opt(ev.study(), kBoth, 2, Nsga2Options{10});
  const auto records = run_optimizer(opt, ev, 100, 2, {});
  EXPECT_EQ(records.size(), 100u);
  EXPECT_EQ(opt.generation(), 10u);
  std::set<space::Configuration> distinct;
  for (const auto &r : records) distinct.insert(r.config);
  EXPECT_GT(distinct.size(), 50u);
}

TEST(Nsga2, PopulationEqualToBudgetIssuesNoChildren) {
  FunctionEvaluator ev(study("gemm-cpu"), separable);
  Nsga2 opt(ev.study(), kBoth, 3, Nsga2Options{8});
  const auto records = run_optimizer(opt, ev, 8, 3, {});
  EXPECT_EQ(records.size(), 8u);
  EXPECT_EQ(ev.calls, 8);
  EXPECT_EQ(opt.generation(), 1u);
}

TEST(Nsga2, DeterministicForSeed) {
  FunctionEvaluator ev(study("spmm-cpu"), separable);
  const auto a = run("nsga2", ev, 40, 5, kBoth, json{{"population", 8}});
  const auto b = run("nsga2", ev, 40, 5, kBoth, json{{"population", 8}});
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].config, b[i].config);
}

TEST(Nsga2, HypervolumeAtLeastRandomMedianOnSeparableTask) {
  std::vector<double> nsga, random;
  const Point reference = {12.0, 12.0};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    FunctionEvaluator ev(study("gemm-cpu"), separable);
    nsga.push_back(metrics::hypervolume_2d(feasible_values(run("nsga2", ev, 100, seed, kBoth)), reference).value);
    random.push_back(
        metrics::hypervolume_2d(feasible_values(run("random_search", ev, 100, seed, kBoth)), reference).value);
  }
  EXPECT_GE(median(nsga), median(random));
}

TEST(ModelBased, OneGuidedQueryAfterInitialDesign) {
  FunctionEvaluator ev(study("gemm-cpu"), separable);
  ModelBased opt(ev.study(), kBoth, 1);
  run_optimizer(opt, ev, 11, 1, {});
  EXPECT_EQ(opt.model_guided_queries(), 1u);
}

TEST(ModelBased, BudgetMustExceedInitialDesign) {
  const auto s = study("gemm-cpu");
  EXPECT_THROW(make_optimizer("model_based", s, kBoth, 0, 10, json::object()), Error);
  EXPECT_NO_THROW(make_optimizer("model_based", s, kBoth, 0, 6, json{{"initial_design", 5}}));
}

TEST(ModelBased, DeterministicReplay) {
  FunctionEvaluator ev(study("spmm-cpu"), separable);
  const auto a = run("model_based", ev, 20, 9, kBoth), b = run("model_based", ev, 20, 9, kBoth);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].config, b[i].config);
}

TEST(ModelBased, FallsBackToRandomWithoutFeasibleData) {
  FunctionEvaluator ev(study("gemm-cpu"), [](const std::vector<double> &) { return std::optional<Point>(); });
  ModelBased opt(ev.study(), kBoth, 1, ModelBasedOptions{3});
  const auto records = run_optimizer(opt, ev, 8, 1, {});
  EXPECT_EQ(records.size(), 8u);
  EXPECT_EQ(opt.model_guided_queries(), 0u);
  EXPECT_EQ(ev.invalid_queries, 0);
}

TEST(ModelBased, DominatingCandidateWinsForAnyWeights) {
  Rng rng(10);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.index(20), m = 2, t = 4;
    ModelBased::Scored s;
    const auto winner = rng.index(n);
    for (std::size_t c = 0; c < n; ++c) {
      Point mean(m);
      std::vector<Point> members(m, Point(t));
      for (std::size_t j = 0; j < m; ++j) {
        mean[j] = c == winner ? rng.uniform(0, 0.2) : rng.uniform(0.3, 1.0);
        for (auto &x : members[j]) x = mean[j] + rng.uniform(-0.3, 0.3);
      }
      s.means.push_back(mean);
      s.members.push_back(members);
      s.feasibility.push_back(c == winner ? 1.0 : rng.uniform(0, 0.9));
    }
    const std::vector<Point> observed = {{0.5, 0.5}, {0.4, 0.9}};
    for (int w = 0; w < 5; ++w) {
      const double a = rng.uniform();
      EXPECT_EQ(ModelBased::select(s, {a, 1 - a}, observed, 0.05), winner);
    }
  }
}

TEST(ModelBased, TiesBreakByLowestIndex) {
  ModelBased::Scored s;
  for (int c = 0; c < 3; ++c) {
    s.means.push_back({0.5});
    s.members.push_back({{0.4, 0.6}});
    s.feasibility.push_back(1.0);
  }
  EXPECT_EQ(ModelBased::select(s, {1.0}, {{0.5}}, 0.05), 0u);
}

TEST(ModelBased, SingleObjectiveMedianBeatsRandom) {
  std::vector<double> guided, random;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    FunctionEvaluator ev(study("gemm-cpu"), single);
    guided.push_back(final_best(run("model_based", ev, 50, seed, kRuntime)));
    random.push_back(final_best(run("random_search", ev, 50, seed, kRuntime)));
  }
  EXPECT_LE(median(guided), median(random));
}

TEST(Chebyshev, AugmentedMaximum) {
  EXPECT_DOUBLE_EQ(chebyshev({0.2, 0.6}, {0.5, 0.5}, 0.0), 0.3);
  EXPECT_DOUBLE_EQ(chebyshev({0.2, 0.6}, {0.5, 0.5}, 0.1), 0.3 + 0.1 * 0.4);
}

TEST(Runner, ReplaySkipsEvaluation) {
  FunctionEvaluator ev(study("gemm-cpu"), separable);
  const auto full = run("nsga2", ev, 16, 2, kBoth, json{{"population", 4}});
  FunctionEvaluator again(study("gemm-cpu"), separable);
  auto opt = make_optimizer("nsga2", again.study(), kBoth, 2, 16, json{{"population", 4}});
  const std::vector<EvaluationRecord> prefix(full.begin(), full.begin() + 9);
  std::size_t streamed = 0;
  const auto resumed = run_optimizer(*opt, again, 16, 2, {}, prefix, [&](const EvaluationRecord &) { ++streamed; });
  EXPECT_EQ(again.calls, 7);
  EXPECT_EQ(streamed, 7u);
  ASSERT_EQ(resumed.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(resumed[i].config, full[i].config);
}

TEST(Runner, DivergentReplayRejected) {
  FunctionEvaluator ev(study("gemm-cpu"), separable);
  auto records = run("random_search", ev, 5, 1, kBoth);
  records[2].config = space::sample_valid(ev.study().search_space, 999, 1).front();
  auto opt = make_optimizer("random_search", ev.study(), kBoth, 1, 5, json::object());
  try {
    run_optimizer(*opt, ev, 5, 1, {}, records);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
  }
}

TEST(Runner, ReplayLongerThanBudgetRejected) {
  FunctionEvaluator ev(study("gemm-cpu"), separable);
  const auto records = run("random_search", ev, 5, 1, kBoth);
  auto opt = make_optimizer("random_search", ev.study(), kBoth, 1, 4, json::object());
  EXPECT_THROW(run_optimizer(*opt, ev, 4, 1, {}, records), Error);
}
