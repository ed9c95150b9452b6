#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "catbench/error.hpp"
#include "catbench/kernels.hpp"
#include "test_support.hpp"

using namespace catbench;
using namespace catbench::kernels;

namespace {

KernelProblem small_gemm(std::vector<double> a, std::vector<double> b, std::int64_t n) {
  KernelProblem p;
  p.kernel = KernelId::gemm;
  p.m = p.n = p.k = n;
  p.a = std::move(a);
  p.b = std::move(b);
  return p;
}

StudyDefinition test_preset_study(const std::string &kernel) {
  auto doc = testing_support::study_document(kernel + "-cpu");
  doc["kernel"]["preset"] = "test";
  return parse_study(doc);
}

}  // namespace

TEST(Reference, AsumOfSmallVector) {
  KernelProblem p;
  p.kernel = KernelId::asum;
  p.n = 3;
  p.x = {1, -2, 3};
  EXPECT_EQ(compute_reference(p), std::vector<double>{6});
}

TEST(Reference, GemmTwoByTwo) {
  const auto c = compute_reference(small_gemm({1, 2, 3, 4}, {5, 6, 7, 8}, 2));
  EXPECT_EQ(c, (std::vector<double>{19, 22, 43, 50}));
}

TEST(Reference, GemmWithIdentityReturnsA) {
  const std::vector<double> a = {1, -2, 3, 4, 5, 6, -7, 8, 9};
  EXPECT_EQ(compute_reference(small_gemm(a, {1, 0, 0, 0, 1, 0, 0, 0, 1}, 3)), a);
}

TEST(Reference, IdentityStencilKeepsInterior) {
  auto p = generate_problem(KernelId::stencil, {{"rows", 9}, {"cols", 7}}, 3);
  p.weights = {1, 0, 0, 0, 0};
  EXPECT_EQ(compute_reference(p), p.a);
}

TEST(Reference, SpmvWithIdentityReturnsX) {
  KernelProblem p;
  p.kernel = KernelId::spmv;
  p.m = p.n = 5;
  p.sparse = CsrMatrix::identity(5);
  p.x = {0.5, -1, 2, 3, 4};
  EXPECT_EQ(compute_reference(p), p.x);
}

TEST(Reference, ScalByZero) {
  auto p = generate_problem(KernelId::scal, {{"n", 17}}, 1);
  p.alpha = 0.0;
  for (double v : compute_reference(p)) EXPECT_EQ(v, 0.0);
}

TEST(Reference, KmeansWithOneClusterPerPointHasZeroObjective) {
  auto p = generate_problem(KernelId::kmeans, {{"points", 12}, {"dims", 3}, {"k", 12}}, 5);
  EXPECT_EQ(compute_reference(p).front(), 0.0);
}

TEST(Reference, DimensionMismatchIsMalformed) {
  auto p = small_gemm({1, 2, 3}, {1, 2, 3, 4}, 2);
  try {
    compute_reference(p);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::malformed_problem);
  }
}

TEST(Reference, CsrChecksRejectUnsortedColumns) {
  auto s = CsrMatrix::identity(3);
  s.indices = {2, 0, 1};
  s.offsets = {0, 2, 2, 3};
  EXPECT_THROW(s.check(), Error);
}

TEST(Generation, DeterministicInSeed) {
  for (auto id : all_kernels()) {
    const auto study = test_preset_study(std::string(to_string(id)));
    const auto &sizes = study.kernel->sizes();
    const auto a = generate_problem(id, sizes, 7);
    const auto b = generate_problem(id, sizes, 7);
    EXPECT_EQ(a.a, b.a);
    EXPECT_EQ(a.sparse.values, b.sparse.values);
    EXPECT_EQ(a.x, b.x);
    const auto c = generate_problem(id, sizes, 8);
    EXPECT_FALSE(a.a == c.a && a.x == c.x && a.sparse.values == c.sparse.values) << to_string(id);
  }
}

TEST(Generation, SparseRowsHoldDeclaredDensity) {
  const auto p = generate_problem(KernelId::spmv, {{"rows", 50}, {"cols", 400}, {"density", 0.05}}, 2);
  for (std::int64_t r = 0; r < p.m; ++r) EXPECT_EQ(p.sparse.offsets[r + 1] - p.sparse.offsets[r], 20);
  for (double v : p.sparse.values) EXPECT_TRUE(v >= -1.0 && v <= 1.0);
}

class TunedMatchesReference : public ::testing::TestWithParam<KernelId> {};

TEST_P(TunedMatchesReference, SampledConfigurations) {
  const auto study = test_preset_study(std::string(to_string(GetParam())));
  const auto problem = generate_problem(GetParam(), study.kernel->sizes(), 11);
  const auto reference = compute_reference(problem);
  std::vector<double> out;
  for (const auto &config : space::sample_valid(study.search_space, 99, 40)) {
    run_tuned(problem, decode_knobs(study.search_space, config), out);
    EXPECT_LE(relative_error(out, reference), 1e-10) << study.search_space.describe(config);
  }
}

INSTANTIATE_TEST_SUITE_P(AllKernels, TunedMatchesReference, ::testing::ValuesIn(all_kernels()),
                         [](const auto &info) { return std::string(to_string(info.param)); });

TEST(Traffic, StreamingKernels) {
  TrafficInputs in{{{"n", 1000}}, 1 << 20};
  EXPECT_EQ(traffic_model(KernelId::asum, {}, in), 8000.0);
  EXPECT_EQ(traffic_model(KernelId::scal, {}, in), 16000.0);
}

TEST(Traffic, UntiledGemmMatchesClosedForm) {
  for (double n : {8.0, 64.0, 512.0}) {
    TuningKnobs knobs;
    knobs.loop_order = {0, 1, 2};
    EXPECT_EQ(traffic_model(KernelId::gemm, knobs, {{{"n", n}}, 8 << 20}), (n * n * n + 2 * n * n) * 8);
  }
}

TEST(Traffic, TiledGemmBeatsUntiledAt512) {
  TuningKnobs untiled, tiled;
  untiled.loop_order = tiled.loop_order = {0, 1, 2};
  tiled.tile_i = tiled.tile_j = tiled.tile_k = 32;
  const TrafficInputs in{{{"n", 512}}, 8 << 20};
  EXPECT_LT(traffic_model(KernelId::gemm, tiled, in), traffic_model(KernelId::gemm, untiled, in));
}

TEST(Traffic, GemmNonincreasingInOuterTileUntilBreakpoint) {
  const TrafficInputs in{{{"n", 256}}, 1 << 16};
  for (int outer = 0; outer < 3; ++outer) {
    double previous = INFINITY;
    for (std::int64_t tile : {0, 4, 8, 16}) {
      TuningKnobs k;
      k.loop_order = {outer, (outer + 1) % 3, (outer + 2) % 3};
      k.tile_i = k.tile_j = k.tile_k = tile;
      const double v = traffic_model(KernelId::gemm, k, in);
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, previous);
      previous = v;
    }
  }
}

TEST(Defaults, DocumentedGemmDefault) {
  const auto study = load_study(bundled_study_path("gemm-cpu"));
  const auto config = list_default_config("gemm");
  const auto &s = study.search_space;
  EXPECT_EQ(std::get<std::int64_t>(config.values[*s.index_of("tile_i")]), 0);
  EXPECT_EQ(std::get<space::Permutation>(config.values[*s.index_of("loop_order")]),
            (space::Permutation{0, 1, 2}));
  EXPECT_EQ(std::get<std::int64_t>(config.values[*s.index_of("threads")]), 1);
  EXPECT_EQ(std::get<std::string>(config.values[*s.index_of("unroll")]), "false");
}

TEST(Defaults, AsumUsesWholeVector) {
  const auto study = load_study(bundled_study_path("asum-cpu"));
  const auto config = list_default_config("asum");
  const auto &s = study.search_space;
  EXPECT_EQ(std::get<std::int64_t>(config.values[*s.index_of("threads")]), 1);
  EXPECT_EQ(std::get<std::int64_t>(config.values[*s.index_of("chunk")]), 0);
}

TEST(Defaults, EveryDefaultIsValid) {
  for (auto id : all_kernels()) {
    const auto study = load_study(bundled_study_path(std::string(to_string(id)) + "-cpu"));
    EXPECT_TRUE(space::validate(study.search_space, list_default_config(to_string(id))).valid)
        << to_string(id);
  }
  EXPECT_THROW(list_default_config("ttv"), Error);
}

TEST(Hidden, ScratchOverflowIsDeterministic) {
  const auto study = test_preset_study("gemm");
  KernelExecutor exec(study);
  auto config = list_default_config("gemm");
  const auto &s = study.search_space;
  config.values[*s.index_of("tile_i")] = std::int64_t{32};
  config.values[*s.index_of("tile_j")] = std::int64_t{64};
  config.values[*s.index_of("tile_k")] = std::int64_t{64};
  ASSERT_TRUE(space::validate(s, config).valid);
  for (int i = 0; i < 3; ++i) {
    const auto r = exec.execute(config, {});
    EXPECT_FALSE(r.feasible);
    EXPECT_EQ(r.infeasibility_reason, "scratch overflow");
    EXPECT_TRUE(r.objectives.empty());
  }
}

TEST(Hidden, ThreadOversubscription) {
  KernelSettings settings;
  settings.available_cores = 2;
  settings.oversubscription_factor = 2.0;
  TuningKnobs knobs;
  knobs.threads = 4;
  EXPECT_FALSE(hidden_violation(settings, knobs, 2));
  knobs.threads = 8;
  EXPECT_EQ(hidden_violation(settings, knobs, 2).value(), "thread oversubscription");
}

TEST(Executor, KnownConstraintViolationRaisesInvalidConfig) {
  const auto study = test_preset_study("gemm");
  KernelExecutor exec(study);
  auto config = list_default_config("gemm");
  const auto &s = study.search_space;
  config.values[*s.index_of("tile_i")] = std::int64_t{64};
  config.values[*s.index_of("tile_j")] = std::int64_t{64};
  try {
    exec.execute(config, {});
    FAIL();
  } catch (const InvalidConfigError &e) {
    EXPECT_EQ(e.violated(), std::vector<int>{0});
  }
}

TEST(Executor, ObjectivesAndTimingsFromFidelities) {
  const auto study = test_preset_study("gemm");
  ExecuteOptions options;
  options.verify_output = true;
  KernelExecutor exec(study, options);
  FidelitySettings f;
  f.iterations = 2;
  f.repeats = 3;
  const auto r = exec.execute(list_default_config("gemm"), f);
  ASSERT_TRUE(r.feasible);
  EXPECT_EQ(r.raw_timings.size(), 3u);
  EXPECT_GT(r.objectives.at("runtime_seconds"), 0.0);
  EXPECT_EQ(r.objectives.at("memory_traffic_bytes"), (72.0 * 72 * 72 + 2 * 72 * 72) * 8);
}

TEST(Executor, OperandsUnchangedByExecution) {
  const auto study = test_preset_study("spmm");
  KernelExecutor exec(study);
  const auto before = exec.problem().b;
  const auto ref_before = compute_reference(exec.problem());
  for (const auto &config : space::sample_valid(study.search_space, 4, 10)) exec.execute(config, {});
  EXPECT_EQ(exec.problem().b, before);
  EXPECT_EQ(compute_reference(exec.problem()), ref_before);
}

TEST(Executor, TrafficIndependentOfFidelities) {
  const auto study = test_preset_study("stencil");
  KernelExecutor exec(study);
  const auto config = space::sample_valid(study.search_space, 1, 1).front();
  FidelitySettings a, b;
  b.iterations = 5;
  b.repeats = 2;
  const auto ra = exec.execute(config, a), rb = exec.execute(config, b);
  if (ra.feasible) EXPECT_EQ(ra.objectives.at("memory_traffic_bytes"), rb.objectives.at("memory_traffic_bytes"));
}

TEST(Executor, CoreOverrideFromEnvironment) {
  KernelSettings settings;
  settings.available_cores = 3;
  ::setenv("CATBENCH_CORES", "16", 1);
  EXPECT_EQ(available_cores(settings), 16);
  ::setenv("CATBENCH_CORES", "zero", 1);
  EXPECT_EQ(available_cores(settings), 3);
  ::unsetenv("CATBENCH_CORES");
}

TEST(Executor, MoreRepeatsDoNotIncreaseVariance) {
  const auto study = test_preset_study("asum");
  KernelExecutor exec(study);
  FidelitySettings one, ten;
  ten.repeats = 10;
  auto variance = [&](const space::Configuration &config, const FidelitySettings &f) {
    std::vector<double> xs;
    for (int i = 0; i < 6; ++i) {
      const auto r = exec.execute(config, f);
      if (r.feasible) xs.push_back(r.objectives.at("runtime_seconds"));
    }
    if (xs.size() < 2) return std::nan("");
    double mean = 0, ss = 0;
    for (double x : xs) mean += x / xs.size();
    for (double x : xs) ss += (x - mean) * (x - mean);
    return ss / (xs.size() - 1);
  };
  std::vector<double> v1, v10;
  for (const auto &config : space::sample_valid(study.search_space, 7, 40)) {
    const double a = variance(config, one), b = variance(config, ten);
    if (std::isnan(a) || std::isnan(b)) continue;
    v1.push_back(a);
    v10.push_back(b);
  }
  ASSERT_GE(v1.size(), 30u);
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  EXPECT_LE(median(v10), median(v1));
}
