#include <gtest/gtest.h>

#include <cmath>

#include "catbench/error.hpp"
#include "catbench/surrogate.hpp"
#include "test_support.hpp"

using namespace catbench;
using namespace catbench::surrogate;

namespace {

const std::string kRuntime = "runtime_seconds";
const std::string kTraffic = "memory_traffic_bytes";

StudyDefinition asum_study() { return parse_study(testing_support::study_document("asum-cpu")); }

EvaluationRecord make_record(const StudyDefinition &study, const space::Configuration &c, double runtime,
                             double traffic = 1.0) {
  EvaluationRecord r;
  r.study_id = study.study_id;
  r.config = c;
  r.result.objectives = {{kRuntime, runtime}, {kTraffic, traffic}};
  return r;
}

// threads, chunk and schedule carry weights 4, 2, 1 on their encoded rank.
double planted(const StudyDefinition &study, const space::Configuration &c) {
  const auto v = space::encode(study.search_space, c);
  return 1.0 + 4.0 * v[0] + 2.0 * v[1] + 1.0 * v[2];
}

std::vector<EvaluationRecord> planted_records(const StudyDefinition &study) {
  std::vector<EvaluationRecord> out;
  for (const auto &c : space::enumerate_valid(study.search_space, 1000).configs)
    out.push_back(make_record(study, c, planted(study, c)));
  return out;
}

}  // namespace

TEST(R2, PerfectPrediction) { EXPECT_DOUBLE_EQ(r2({1, 2, 3}, {1, 2, 3}), 1.0); }

TEST(R2, MeanPredictorIsZero) { EXPECT_DOUBLE_EQ(r2({2, 2, 2}, {1, 2, 3}), 0.0); }

TEST(R2, WorseThanMeanIsNegative) { EXPECT_LT(r2({3, 2, 1}, {1, 2, 3}), 0.0); }

TEST(R2, HandComputed) {
  // SS_res = 0.25 * 2, SS_tot = 2.
  EXPECT_DOUBLE_EQ(r2({1.5, 2, 2.5}, {1, 2, 3}), 0.75);
}

TEST(R2, InvariantToAffineScaling) {
  const std::vector<double> p = {1.1, 1.9, 3.2, 3.8}, t = {1, 2, 3, 4};
  std::vector<double> ps, ts;
  for (std::size_t i = 0; i < p.size(); ++i) {
    ps.push_back(1000 * p[i] + 7);
    ts.push_back(1000 * t[i] + 7);
  }
  EXPECT_NEAR(r2(p, t), r2(ps, ts), 1e-12);
}

TEST(R2, ConstantTargetsAreUndefined) {
  try {
    r2({1, 2}, {5, 5});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::undefined_score);
  }
}

TEST(R2, TooFewValues) {
  try {
    r2({1}, {1});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::insufficient_data);
  }
  EXPECT_THROW(r2({1, 2}, {1, 2, 3}), Error);
}

TEST(Fit, ConstantTargetPredictsConstant) {
  const auto study = asum_study();
  std::vector<EvaluationRecord> records;
  for (const auto &c : space::sample_valid(study.search_space, 1, 40)) records.push_back(make_record(study, c, 0.5));
  for (auto kind : {ModelKind::ensemble, ModelKind::knn}) {
    FitOptions o;
    o.kind = kind;
    const auto m = SurrogateModel::fit(study, records, {kRuntime}, 3, o);
    for (const auto &c : space::sample_valid(study.search_space, 9, 20))
      EXPECT_DOUBLE_EQ(m.predict(kRuntime, c, {}), 0.5);
  }
}

TEST(Fit, TooFewFeasibleRecords) {
  const auto study = asum_study();
  std::vector<EvaluationRecord> records;
  for (const auto &c : space::sample_valid(study.search_space, 1, 15)) {
    records.push_back(make_record(study, c, 1.0));
    records.back().result.feasible = records.size() <= 9;
  }
  try {
    SurrogateModel::fit(study, records, {kRuntime}, 0);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::insufficient_data);
  }
}

TEST(Fit, UnknownObjectiveRejected) {
  const auto study = asum_study();
  EXPECT_THROW(SurrogateModel::fit(study, planted_records(study), {"energy"}, 0), Error);
  EXPECT_THROW(SurrogateModel::fit(study, planted_records(study), {}, 0), Error);
}

TEST(Fit, IgnoresInfeasibleRecords) {
  const auto study = asum_study();
  auto records = planted_records(study);
  auto noisy = records;
  for (const auto &c : space::sample_valid(study.search_space, 5, 30)) {
    noisy.push_back(make_record(study, c, 1e6));
    noisy.back().result.feasible = false;
  }
  const auto a = SurrogateModel::fit(study, records, {kRuntime}, 4);
  const auto b = SurrogateModel::fit(study, noisy, {kRuntime}, 4);
  EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(Fit, DeterministicForSeed) {
  const auto study = asum_study();
  const auto records = planted_records(study);
  EXPECT_EQ(SurrogateModel::fit(study, records, {kRuntime, kTraffic}, 8).to_json(),
            SurrogateModel::fit(study, records, {kRuntime, kTraffic}, 8).to_json());
}

TEST(Fit, PlantedSignalRecoveredOnHoldout) {
  const auto study = asum_study();
  const auto records = planted_records(study);
  std::vector<EvaluationRecord> train, holdout;
  for (std::size_t i = 0; i < records.size(); ++i) (i % 4 == 0 ? holdout : train).push_back(records[i]);
  const auto m = SurrogateModel::fit(study, train, {kRuntime}, 2);
  EXPECT_GE(r2_score(m, holdout, kRuntime), 0.9);
}

TEST(Fit, PredictsConstraintViolatingConfig) {
  auto doc = testing_support::study_document("asum-cpu");
  doc["search_space"]["known_constraints"] = json::array({"threads <= 2"});
  const auto study = parse_study(doc);
  const auto m = SurrogateModel::fit(study, planted_records(study), {kRuntime}, 1);
  const auto bad = study.search_space.config_from_json(
      json{{"threads", 8}, {"chunk", 0}, {"schedule", "static"}, {"unroll", 1}});
  ASSERT_FALSE(space::validate(study.search_space, bad).valid);
  const auto result = m.predict(bad, {});
  EXPECT_TRUE(result.feasible);
  EXPECT_TRUE(std::isfinite(result.objectives.at(kRuntime)));
}

TEST(Fit, LogTargetPredictsPositive) {
  const auto study = asum_study();
  FitOptions o;
  o.log_target = true;
  const auto m = SurrogateModel::fit(study, planted_records(study), {kRuntime}, 1, o);
  for (const auto &c : space::sample_valid(study.search_space, 3, 50)) EXPECT_GT(m.predict(kRuntime, c, {}), 0.0);
}

TEST(Fit, FidelitiesAreFeatures) {
  const auto study = asum_study();
  std::vector<EvaluationRecord> records;
  for (const auto &c : space::enumerate_valid(study.search_space, 1000).configs)
    for (std::int64_t repeats : {1, 20}) {
      records.push_back(make_record(study, c, repeats == 1 ? 1.0 : 2.0));
      records.back().fidelities.repeats = repeats;
    }
  FitOptions o;
  o.kind = ModelKind::knn;
  o.knn_k = 1;
  const auto m = SurrogateModel::fit(study, records, {kRuntime}, 0, o);
  const auto c = records.front().config;
  FidelitySettings low, high;
  high.repeats = 20;
  EXPECT_DOUBLE_EQ(m.predict(kRuntime, c, low), 1.0);
  EXPECT_DOUBLE_EQ(m.predict(kRuntime, c, high), 2.0);
}

TEST(NearestNeighbors, DuplicatesEqualWeightedDeduplicated) {
  const auto study = asum_study();
  const auto &s = study.search_space;
  const auto configs = space::sample_valid(s, 4, 6);
  std::vector<NearestNeighbors::Point> dup, dedup;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    dup.push_back({configs[i], {}, double(i), 1.0});
    if (i % 2 == 0) {
      dup.push_back({configs[i], {}, double(i) + 2, 1.0});
      dedup.push_back({configs[i], {}, double(i) + 1, 2.0});
    } else {
      dedup.push_back({configs[i], {}, double(i), 1.0});
    }
  }
  for (int k : {1, 2, 3, 5}) {
    const NearestNeighbors a(s, dup, k), b(s, dedup, k);
    ASSERT_EQ(a.points().size(), b.points().size());
    for (std::size_t i = 0; i < a.points().size(); ++i) {
      EXPECT_EQ(a.points()[i].config, b.points()[i].config);
      EXPECT_DOUBLE_EQ(a.points()[i].target, b.points()[i].target);
      EXPECT_DOUBLE_EQ(a.points()[i].weight, b.points()[i].weight);
    }
    for (const auto &c : space::enumerate_valid(s, 1000).configs) EXPECT_DOUBLE_EQ(a.predict(c, {}), b.predict(c, {}));
  }
}

TEST(NearestNeighbors, ExactMatchWithOneNeighbor) {
  const auto study = asum_study();
  const auto records = planted_records(study);
  FitOptions o;
  o.kind = ModelKind::knn;
  o.knn_k = 1;
  const auto m = SurrogateModel::fit(study, records, {kRuntime}, 0, o);
  EXPECT_DOUBLE_EQ(r2_score(m, records, kRuntime), 1.0);
}

TEST(NearestNeighbors, InvalidK) {
  const auto study = asum_study();
  EXPECT_THROW(NearestNeighbors(study.search_space, {}, 0), Error);
  EXPECT_THROW(NearestNeighbors(study.search_space, {}, 1), Error);
}

TEST(Forest, EnsembleSpreadIsPerMember) {
  const auto study = asum_study();
  ForestOptions fo;
  fo.trees = 7;
  FitOptions o;
  o.forest = fo;
  const auto m = SurrogateModel::fit(study, planted_records(study), {kRuntime}, 5, o);
  const auto c = planted_records(study).front().config;
  const auto members = m.predict_members(kRuntime, c, {});
  EXPECT_EQ(members.size(), 7u);
  double mean = 0;
  for (double v : members) mean += v / members.size();
  EXPECT_NEAR(mean, m.predict(kRuntime, c, {}), 1e-12);
}

TEST(Forest, InvalidOptions) {
  ForestOptions o;
  o.trees = 0;
  EXPECT_THROW(Forest::fit({{0.0}}, {1.0}, {1.0}, o, 0), Error);
}

TEST(Serialization, RoundTripPreservesPredictions) {
  const auto study = asum_study();
  const auto records = planted_records(study);
  for (auto kind : {ModelKind::ensemble, ModelKind::knn}) {
    FitOptions o;
    o.kind = kind;
    o.log_target = true;
    const auto m = SurrogateModel::fit(study, records, {kRuntime, kTraffic}, 6, o);
    const auto back = SurrogateModel::from_json(json::parse(m.to_json().dump()));
    EXPECT_EQ(back.record_count(), m.record_count());
    EXPECT_EQ(back.objectives(), m.objectives());
    for (const auto &r : records) EXPECT_EQ(back.predict(r.config, {}), m.predict(r.config, {}));
  }
}

TEST(Serialization, RejectsForeignDocument) {
  try {
    SurrogateModel::from_json(json{{"format", "other"}});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::parse);
  }
}

TEST(ModelKind, Parse) {
  EXPECT_EQ(parse_model_kind("knn"), ModelKind::knn);
  EXPECT_EQ(parse_model_kind("ensemble"), ModelKind::ensemble);
  EXPECT_THROW(parse_model_kind("catboost"), Error);
}
