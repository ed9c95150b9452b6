#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "catbench/error.hpp"
#include "catbench/records.hpp"
#include "test_support.hpp"

using namespace catbench;

namespace {

class LogFile : public ::testing::Test {
 protected:
  void SetUp() override {
    path_ = std::filesystem::temp_directory_path() /
            ("catbench_records_" + std::to_string(::getpid()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name() + ".jsonl");
    std::filesystem::remove(path_);
    study_ = parse_study(testing_support::study_document("spmm-cpu"));
  }
  void TearDown() override { std::filesystem::remove(path_); }

  EvaluationRecord record(std::uint64_t seed, std::int64_t iteration, bool feasible) const {
    EvaluationRecord r;
    r.study_id = study_.study_id;
    r.server_label = "host:7070";
    r.config = space::sample_valid(study_.search_space, seed * 100 + iteration, 1).front();
    r.fidelities.repeats = 3;
    r.fidelities.wait_between_repeats_ms = 5;
    r.result.feasible = feasible;
    if (feasible) {
      r.result.objectives = {{"runtime_seconds", 0.125 + iteration}, {"memory_traffic_bytes", 1e9 / 3}};
      r.result.raw_timings = {0.1, 0.125, 0.2};
    } else {
      r.result.infeasibility_reason = "scratch buffer exceeds budget";
    }
    r.result.evaluation_id = "host:7070-" + std::to_string(iteration);
    r.result.server_label = r.server_label;
    r.optimizer = "nsga2";
    r.seed = seed;
    r.iteration = iteration;
    r.timestamp_ms = 1'700'000'000'000 + iteration;
    return r;
  }

  std::filesystem::path path_;
  StudyDefinition study_;
};

}  // namespace

TEST_F(LogFile, RoundTripIsIdentity) {
  std::vector<EvaluationRecord> records;
  for (int i = 0; i < 20; ++i) records.push_back(record(1 + i % 2, i, i % 5 != 3));
  write_log(path_, study_.search_space, records);
  EXPECT_EQ(read_log(path_, study_.search_space), records);
}

TEST_F(LogFile, WriterAppends) {
  {
    LogWriter w(path_, study_.search_space);
    w.append(record(1, 0, true));
  }
  LogWriter w(path_, study_.search_space);
  w.append(record(1, 1, false));
  const auto back = read_log(path_, study_.search_space);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1], record(1, 1, false));
}

TEST_F(LogFile, RecordHasExactlyTheLoggedFields) {
  const auto j = record_to_json(study_.search_space, record(1, 0, true));
  std::vector<std::string> keys;
  for (const auto &[k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"config", "fidelities", "iteration", "optimizer", "result", "seed",
                                            "server_label", "study_id", "timestamp"}));
  EXPECT_EQ(j["fidelities"].size(), 4u);
}

TEST_F(LogFile, BlankLinesIgnored) {
  write_log(path_, study_.search_space, {record(1, 0, true)});
  std::ofstream(path_, std::ios::app) << "\n   \n";
  EXPECT_EQ(read_log(path_, study_.search_space).size(), 1u);
}

TEST_F(LogFile, MissingFileIsIo) {
  try {
    read_log(path_, study_.search_space);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::io);
  }
}

TEST_F(LogFile, MalformedLineNamesLineNumber) {
  write_log(path_, study_.search_space, {record(1, 0, true)});
  std::ofstream(path_, std::ios::app) << "{\"config\": \n";
  try {
    read_log(path_, study_.search_space);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::parse);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST_F(LogFile, OutOfDomainConfigIsParseError) {
  auto j = record_to_json(study_.search_space, record(1, 0, true));
  j["config"]["threads"] = 3;
  std::ofstream(path_) << j.dump() << "\n";
  try {
    read_log(path_, study_.search_space);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::parse);
  }
}

TEST_F(LogFile, MissingFieldIsParseError) {
  auto j = record_to_json(study_.search_space, record(1, 0, true));
  j.erase("seed");
  EXPECT_THROW(record_from_json(study_.search_space, j), Error);
}

TEST(Records, ObjectiveOfInfeasibleIsEmpty) {
  EvaluationRecord r;
  r.result.feasible = false;
  EXPECT_FALSE(objective_of(r, "runtime_seconds").has_value());
  r.result.feasible = true;
  r.result.objectives["runtime_seconds"] = 2.0;
  EXPECT_EQ(objective_of(r, "runtime_seconds"), 2.0);
  EXPECT_FALSE(objective_of(r, "energy").has_value());
}

TEST(Records, FidelityJsonDefaultsMissingKeys) {
  const auto f = fidelity_settings_from_json(json{{"repeats", 4}});
  EXPECT_EQ(f.repeats, 4);
  EXPECT_EQ(f.iterations, 1);
  EXPECT_EQ(fidelity_settings_from_json(fidelity_settings_to_json(f)), f);
}
