// Acceptance suite: one PASS/FAIL line per criterion. Optional arguments
// select criteria by name.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "catbench/backend.hpp"
#include "catbench/client.hpp"
#include "catbench/error.hpp"
#include "catbench/frame.hpp"
#include "catbench/kernels.hpp"
#include "catbench/metrics.hpp"
#include "catbench/optimizers.hpp"
#include "catbench/records.hpp"
#include "catbench/server.hpp"
#include "catbench/space.hpp"
#include "catbench/study.hpp"
#include "catbench/surrogate.hpp"
#include "test_support.hpp"
#include "wire_fuzz.hpp"

using namespace catbench;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;
using metrics::Point;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

StudyDefinition bundled(const std::string &id, const std::string &preset = "") {
  auto doc = testing_support::study_document(id);
  if (!preset.empty()) doc["kernel"]["preset"] = preset;
  return parse_study(doc);
}

std::filesystem::path bundled_log(const std::string &study_id) {
  return data_directory() / "logs" / (study_id + ".jsonl");
}

class RunningServer {
 public:
  explicit RunningServer(std::unique_ptr<Backend> backend)
      : server_(std::move(backend), ServerOptions{{"127.0.0.1", 0}, "acceptance"}), thread_([this] { server_.run(); }) {}
  ~RunningServer() {
    server_.request_stop();
    thread_.join();
  }
  Server &server() { return server_; }
  net::Address address() const { return {"127.0.0.1", server_.port()}; }

 private:
  Server server_;
  std::thread thread_;
};

// ---------------------------------------------------------------------------

Outcome kernel_correctness() {
  std::ostringstream detail;
  bool pass = true;
  const auto t0 = Clock::now();
  for (auto id : kernels::all_kernels()) {
    const auto name = std::string(kernels::to_string(id));
    const auto study = bundled(name + "-cpu", "small");
    kernels::ExecuteOptions options;
    options.verify_output = false;
    kernels::KernelExecutor exec(study, options);
    const auto &reference = exec.reference();
    double worst = 0;
    std::vector<double> out;
    for (const auto &config : space::sample_valid(study.search_space, 2024, 200)) {
      kernels::run_tuned(exec.problem(), kernels::decode_knobs(study.search_space, config), out);
      const double err = kernels::relative_error(out, reference);
      if (!(err <= worst)) worst = err;
    }
    pass = pass && worst <= 1e-10;
    detail << name << "=" << fmt(worst, 2) << " ";
  }
  const double elapsed = seconds_since(t0);
  pass = pass && elapsed < 300;
  detail << "max relative error per kernel, " << fmt(elapsed, 3) << " s";
  return {pass, detail.str()};
}

Outcome amortized_initialization() {
  const auto study = bundled("gemm-cpu");
  RunningServer s(std::make_unique<SurrogateBackend>(study, bundled_log("gemm-cpu")));
  Client client(s.address());
  const auto configs = space::sample_valid(study.search_space, 11, 1000);
  const auto fidelities = default_fidelities(study);
  std::vector<double> ms;
  for (const auto &config : configs) {
    const auto t0 = Clock::now();
    client.query(config, fidelities);
    ms.push_back(seconds_since(t0) * 1e3);
  }
  const int inits = s.server().init_count();
  const double med = median(ms);
  return {inits == 1 && client.server_init_count() == 1 && med < 5.0,
          "1000 queries, " + std::to_string(inits) + " initialization(s), median " + fmt(med, 3) + " ms"};
}

double monte_carlo_hypervolume(const std::vector<Point> &pts, const Point &ref, std::size_t samples, Rng &rng) {
  double lo0 = ref[0], lo1 = ref[1];
  for (const auto &p : pts) {
    lo0 = std::min(lo0, p[0]);
    lo1 = std::min(lo1, p[1]);
  }
  std::size_t hits = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const double x = rng.uniform(lo0, ref[0]), y = rng.uniform(lo1, ref[1]);
    for (const auto &p : pts)
      if (p[0] <= x && p[1] <= y) {
        ++hits;
        break;
      }
  }
  return (ref[0] - lo0) * (ref[1] - lo1) * static_cast<double>(hits) / static_cast<double>(samples);
}

Outcome hypervolume_correctness() {
  const double exact = metrics::hypervolume_2d({{1, 2}, {2, 1}}, {3, 3}).value;
  Rng rng(99);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<Point> pts;
    for (int i = 0; i < 20; ++i) pts.push_back({rng.uniform(0, 10), rng.uniform(0, 10)});
    const Point ref{10, 10};
    const double hv = metrics::hypervolume_2d(pts, ref).value;
    const double mc = monte_carlo_hypervolume(pts, ref, 1'000'000, rng);
    worst = std::max(worst, std::abs(hv - mc) / mc);
  }
  return {exact == 3.0 && worst < 0.01,
          "example " + fmt(exact, 17) + ", worst relative gap to Monte Carlo " + fmt(worst, 3) + " over 100 sets"};
}

bool dominates_oracle(const Point &a, const Point &b) {
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    strict = strict || a[i] < b[i];
  }
  return strict;
}

// Front index of each point by repeatedly peeling the non-dominated set.
std::vector<int> peel_ranks(const std::vector<Point> &pts) {
  std::vector<int> rank(pts.size(), -1);
  std::size_t assigned = 0;
  for (int front = 0; assigned < pts.size(); ++front) {
    std::vector<std::size_t> now;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (rank[i] >= 0) continue;
      bool dominated = false;
      for (std::size_t j = 0; j < pts.size() && !dominated; ++j)
        dominated = rank[j] < 0 && dominates_oracle(pts[j], pts[i]);
      if (!dominated) now.push_back(i);
    }
    for (auto i : now) rank[i] = front;
    assigned += now.size();
  }
  return rank;
}

Outcome dominance_machinery() {
  Rng rng(7);
  int sort_mismatch = 0, pareto_mismatch = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto n = 1 + rng.index(100);
    const auto dims = 2 + rng.index(3);
    // Half the instances sit on a coarse grid to force ties and duplicates.
    const bool grid = t % 2 == 0;
    std::vector<Point> pts(n, Point(dims));
    for (auto &p : pts)
      for (auto &v : p) v = grid ? static_cast<double>(rng.index(5)) : rng.uniform(0, 1);
    const auto ranks = peel_ranks(pts);
    std::vector<int> got(n, -1);
    const auto fronts = optimize::non_dominated_sort(pts);
    for (std::size_t f = 0; f < fronts.size(); ++f)
      for (auto i : fronts[f]) got[i] = static_cast<int>(f);
    if (got != ranks) ++sort_mismatch;
    std::set<Point> expected, actual;
    for (std::size_t i = 0; i < n; ++i)
      if (ranks[i] == 0) expected.insert(pts[i]);
    for (auto i : metrics::pareto_front(pts)) actual.insert(pts[i]);
    if (expected != actual) ++pareto_mismatch;
  }
  return {sort_mismatch == 0 && pareto_mismatch == 0,
          "1000 instances, " + std::to_string(sort_mismatch) + " sort and " + std::to_string(pareto_mismatch) +
              " front mismatches"};
}

Outcome constraint_accounting() {
  std::ostringstream detail;
  bool pass = true;
  int checked = 0;
  for (const auto &path : bundled_study_paths()) {
    const auto study = load_study(path);
    if (space::cardinality(study.search_space) > 1'000'000) continue;
    const auto exact = space::enumerate_valid(study.search_space, 1'000'000).ratio;
    Rng rng(31 + checked);
    const int draws = 100'000;
    int valid = 0;
    for (int i = 0; i < draws; ++i)
      valid += space::validate(study.search_space, space::sample_any(study.search_space, rng)).valid;
    const double p = static_cast<double>(valid) / draws;
    const double se = std::sqrt(p * (1 - p) / draws);
    const bool ok = se > 0 ? std::abs(p - exact) <= 3 * se : p == exact;
    pass = pass && ok;
    ++checked;
    if (!ok) detail << study.study_id << " exact " << fmt(exact) << " sampled " << fmt(p) << "; ";
  }
  detail << checked << " studies with cardinality <= 1e6 checked";
  return {pass && checked > 0, detail.str()};
}

struct StudyRuns {
  // final scores by optimizer, one per seed
  std::map<std::string, std::vector<double>> scores;
};

std::vector<std::vector<EvaluationRecord>> run_all(const StudyDefinition &study, Evaluator &evaluator,
                                                   const std::string &optimizer,
                                                   const std::vector<std::string> &objectives) {
  std::vector<std::vector<EvaluationRecord>> runs;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto opt = optimize::make_optimizer(optimizer, study, objectives, seed, 100, json::object());
    runs.push_back(optimize::run_optimizer(*opt, evaluator, 100, seed, default_fidelities(study)));
  }
  return runs;
}

std::string ordering_line(const std::string &study, const std::map<std::string, double> &med, double p) {
  return study + " median mb/nsga2/random " + fmt(med.at("model_based")) + "/" + fmt(med.at("nsga2")) + "/" +
         fmt(med.at("random_search")) + " p=" + fmt(p, 3);
}

Outcome optimizer_ordering() {
  const std::vector<std::string> names = {"model_based", "nsga2", "random_search"};
  std::ostringstream detail;
  bool ordered = true, significant = false;

  {
    // Single objective: runtime on spmm-cpu.
    const auto study = bundled("spmm-cpu");
    auto backend = make_backend(study, "surrogate", bundled_log("spmm-cpu"));
    LocalEvaluator evaluator(*backend);
    std::map<std::string, std::vector<double>> finals;
    std::map<std::string, double> med;
    for (const auto &name : names) {
      for (const auto &run : run_all(study, evaluator, name, {"runtime_seconds"}))
        finals[name].push_back(*metrics::incumbent_trajectory(run, "runtime_seconds").back());
      med[name] = median(finals[name]);
    }
    const double p = metrics::wilcoxon_signed_rank(finals["model_based"], finals["random_search"]);
    ordered = ordered && med["model_based"] <= med["nsga2"] && med["nsga2"] <= med["random_search"];
    significant = significant || (p < 0.05 && med["model_based"] < med["random_search"]);
    detail << ordering_line("spmm-cpu runtime", med, p) << "; ";
  }
  {
    // Two objectives: hypervolume on gemm-cpu against one shared reference.
    const auto study = bundled("gemm-cpu");
    const std::vector<std::string> objectives = {"runtime_seconds", "memory_traffic_bytes"};
    auto backend = make_backend(study, "surrogate", bundled_log("gemm-cpu"));
    LocalEvaluator evaluator(*backend);
    std::map<std::string, std::vector<std::vector<Point>>> fronts;
    std::vector<Point> all;
    for (const auto &name : names)
      for (const auto &run : run_all(study, evaluator, name, objectives)) {
        std::vector<Point> pts;
        for (const auto &r : run)
          if (auto v = optimize::objective_vector(r.result, objectives)) pts.push_back(*v);
        all.insert(all.end(), pts.begin(), pts.end());
        fronts[name].push_back(std::move(pts));
      }
    const auto ref = metrics::default_reference(all);
    std::map<std::string, std::vector<double>> finals;
    std::map<std::string, double> med;
    for (const auto &name : names) {
      for (const auto &pts : fronts[name]) finals[name].push_back(metrics::hypervolume_2d(pts, ref).value);
      med[name] = median(finals[name]);
    }
    const double p = metrics::wilcoxon_signed_rank(finals["model_based"], finals["random_search"]);
    ordered = ordered && med["model_based"] >= med["nsga2"] && med["nsga2"] >= med["random_search"];
    significant = significant || (p < 0.05 && med["model_based"] > med["random_search"]);
    detail << ordering_line("gemm-cpu hypervolume", med, p);
  }
  return {ordered && significant, detail.str()};
}

// asum-cpu records whose runtime is 4:2:1 in the encoded threads, chunk and
// schedule columns; unroll does not contribute.
std::vector<EvaluationRecord> planted_records(const StudyDefinition &study, std::uint64_t seed, std::size_t n) {
  std::vector<EvaluationRecord> out;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    EvaluationRecord r;
    r.study_id = study.study_id;
    r.config = space::sample_any(study.search_space, rng);
    const auto v = space::encode(study.search_space, r.config);
    r.result.objectives = {{"runtime_seconds", 1.0 + 4.0 * v[0] + 2.0 * v[1] + 1.0 * v[3]}};
    r.iteration = static_cast<std::int64_t>(i);
    out.push_back(r);
  }
  return out;
}

Outcome importance_recovery() {
  const auto study = bundled("asum-cpu");
  int correct = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto train = planted_records(study, 1000 + seed, 400), holdout = planted_records(study, 2000 + seed, 100);
    const auto model = surrogate::SurrogateModel::fit(study, train, {"runtime_seconds"}, seed);
    const auto s = metrics::permutation_importance(model, holdout, "runtime_seconds", seed, 10);
    correct += s[0] > s[1] && s[1] > s[2] && s[2] > s[3];
  }
  return {correct >= 18, std::to_string(correct) + "/20 seeds rank threads > chunk > schedule > unroll"};
}

Outcome surrogate_quality() {
  const auto gemm = bundled("gemm-cpu");
  const auto records = read_log(bundled_log("gemm-cpu"), gemm.search_space);
  if (records.size() < 2500) return {false, "bundled gemm-cpu log holds " + std::to_string(records.size()) + " records"};
  const std::vector<EvaluationRecord> train(records.begin(), records.begin() + 2000),
      holdout(records.begin() + 2000, records.begin() + 2500);
  const auto model = surrogate::SurrogateModel::fit(gemm, train, {"runtime_seconds"}, 1);
  const double ensemble = surrogate::r2_score(model, holdout, "runtime_seconds");

  // Every valid asum-cpu configuration measured once at the test preset.
  const auto small = bundled("asum-cpu", "test");
  KernelBackend backend(small);
  std::vector<EvaluationRecord> table;
  for (const auto &config : space::enumerate_valid(small.search_space, 1'000'000).configs) {
    EvaluationRecord r;
    r.study_id = small.study_id;
    r.config = config;
    r.result = backend.evaluate(config, default_fidelities(small));
    if (r.result.feasible) table.push_back(std::move(r));
  }
  surrogate::FitOptions knn;
  knn.kind = surrogate::ModelKind::knn;
  knn.knn_k = 1;
  const auto nearest = surrogate::SurrogateModel::fit(small, table, {"runtime_seconds"}, 1, knn);
  const double self = surrogate::r2_score(nearest, table, "runtime_seconds");
  return {ensemble >= 0.8 && self == 1.0, "gemm-cpu ensemble holdout R2 " + fmt(ensemble) + " (2000/500), k=1 on " +
                                              std::to_string(table.size()) + " asum-cpu configs R2 " + fmt(self, 17)};
}

Outcome speedup_sanity() {
  const auto study = bundled("gemm-cpu", "large");
  kernels::ExecuteOptions options;
  options.verify_output = false;
  KernelBackend backend(study, options);
  FidelitySettings screen = default_fidelities(study);
  double best = INFINITY;
  space::Configuration best_config;
  for (const auto &config : space::sample_valid(study.search_space, 500, 500)) {
    const auto r = backend.evaluate(config, screen);
    if (r.feasible && r.objectives.at("runtime_seconds") < best) {
      best = r.objectives.at("runtime_seconds");
      best_config = config;
    }
  }
  // Re-measure the winner and the default with the same repeats.
  FidelitySettings confirm = screen;
  confirm.repeats = 5;
  const auto def = backend.evaluate(kernels::default_config(study.search_space), confirm);
  const auto win = backend.evaluate(best_config, confirm);
  if (!def.feasible || !win.feasible) return {false, "default or best configuration infeasible"};
  const double speedup = def.objectives.at("runtime_seconds") / win.objectives.at("runtime_seconds");
  return {speedup > 1.0, "n=512 default " + fmt(def.objectives.at("runtime_seconds")) + " s, best of 500 " +
                             fmt(win.objectives.at("runtime_seconds")) + " s, speedup " + fmt(speedup, 3)};
}

Outcome protocol_robustness() {
  Rng rng(2024);
  int failures = 0;
  for (int i = 0; i < 100'000; ++i) {
    const auto e = testing_support::random_envelope(rng);
    const auto frame = wire::encode_frame(e);
    const bool ok = wire::read_length(reinterpret_cast<const unsigned char *>(frame.data())) == frame.size() - 4 &&
                    wire::decode_payload(std::string_view(frame).substr(4)) == e;
    failures += !ok;
  }

  const auto study = bundled("gemm-cpu");
  RunningServer s(std::make_unique<SurrogateBackend>(study, bundled_log("gemm-cpu")));
  const std::vector<std::string> malformed = {
      std::string("\0\0\0\x05hello", 9),
      std::string("\x7f\xff\xff\xff", 4),
      std::string("\0\0\0\x40{\"message_id\"", 17),
      std::string("\0\0\0\x02[]", 6),
      std::string("\0\0\0\0", 4),
  };
  for (const auto &bytes : malformed) {
    net::FramedConnection conn(net::connect_to(s.address(), 2s));
    conn.send_raw(bytes);
  }
  // Random garbage with valid length prefixes.
  for (int i = 0; i < 200; ++i) {
    net::FramedConnection conn(net::connect_to(s.address(), 2s));
    std::string payload(rng.index(64), '\0');
    for (auto &c : payload) c = static_cast<char>(rng.index(256));
    unsigned char h[4];
    wire::write_length(static_cast<std::uint32_t>(payload.size()), h);
    conn.send_raw(std::string(reinterpret_cast<char *>(h), 4) + payload);
  }
  bool alive = false;
  try {
    Client client(s.address());
    client.query(space::sample_valid(study.search_space, 3, 1).front(), default_fidelities(study));
    alive = s.server().init_count() == 1;
  } catch (const std::exception &) {
  }
  return {failures == 0 && alive, std::to_string(failures) + " of 100000 fuzzed envelopes failed round-trip; server " +
                                      (alive ? "answered" : "did not answer") + " after 205 malformed frames"};
}

}  // namespace

int main(int argc, char **argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"kernel_correctness", kernel_correctness},
      {"amortized_initialization", amortized_initialization},
      {"hypervolume_correctness", hypervolume_correctness},
      {"dominance_machinery", dominance_machinery},
      {"constraint_accounting", constraint_accounting},
      {"optimizer_ordering", optimizer_ordering},
      {"importance_recovery", importance_recovery},
      {"surrogate_quality", surrogate_quality},
      {"speedup_sanity", speedup_sanity},
      {"protocol_robustness", protocol_robustness},
  };
  const std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto &[name, check] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << fmt(seconds_since(t0), 3)
              << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
