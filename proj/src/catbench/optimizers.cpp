#include "catbench/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "catbench/error.hpp"

namespace catbench::optimize {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string &message) {
  if (!ok) throw Error(ErrorCode::invalid_argument, message);
}

space::Configuration sample_one(const space::SearchSpace &space, Rng &rng) {
  return space::sample_valid(space, rng.next(), 1).front();
}

// Order crossover: the child keeps a slice of `keep` and fills the remaining
// positions with the missing elements in the order they appear in `fill`,
// starting after the slice.
space::Permutation order_crossover(const space::Permutation &keep, const space::Permutation &fill,
                                   std::size_t lo, std::size_t hi) {
  const std::size_t n = keep.size();
  space::Permutation child(n, -1);
  std::vector<bool> used(n, false);
  for (std::size_t i = lo; i <= hi; ++i) {
    child[i] = keep[i];
    used[static_cast<std::size_t>(keep[i])] = true;
  }
  std::size_t pos = (hi + 1) % n;
  for (std::size_t s = 0; s < n; ++s) {
    const int v = fill[(hi + 1 + s) % n];
    if (used[static_cast<std::size_t>(v)]) continue;
    child[pos] = v;
    used[static_cast<std::size_t>(v)] = true;
    pos = (pos + 1) % n;
  }
  return child;
}

}  // namespace

bool dominates(const Point &a, const Point &b) {
  bool strict = false;
  for (std::size_t m = 0; m < a.size(); ++m) {
    if (a[m] > b[m]) return false;
    if (a[m] < b[m]) strict = true;
  }
  return strict;
}

std::vector<std::vector<std::size_t>> non_dominated_sort(const std::vector<Point> &points) {
  const std::size_t n = points.size();
  for (const auto &p : points)
    require(p.size() == points.front().size(), "non_dominated_sort: points differ in dimension");
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> count(n, 0);
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (dominates(points[i], points[j])) {
        dominated[i].push_back(j);
        ++count[j];
      } else if (dominates(points[j], points[i])) {
        dominated[j].push_back(i);
        ++count[i];
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (count[i] == 0) current.push_back(i);
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (auto i : current)
      for (auto j : dominated[i])
        if (--count[j] == 0) next.push_back(j);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return fronts;
}

std::vector<double> crowding_distance(const std::vector<Point> &front) {
  const std::size_t n = front.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  const std::size_t dims = front.front().size();
  for (std::size_t m = 0; m < dims; ++m) {
    std::vector<double> values;
    values.reserve(n);
    for (const auto &p : front) values.push_back(p[m]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    const double lo = values.front(), hi = values.back();
    if (lo == hi) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = front[i][m];
      if (v == lo || v == hi) {
        out[i] = kInf;
        continue;
      }
      const auto it = std::lower_bound(values.begin(), values.end(), v);
      out[i] += (*(it + 1) - *(it - 1)) / (hi - lo);
    }
  }
  return out;
}

double expected_improvement(double mean, double sigma, double best) {
  require(sigma >= 0.0, "expected_improvement: sigma must be nonnegative");
  const double gain = best - mean;
  if (sigma == 0.0) return std::max(gain, 0.0);
  const double z = gain / sigma;
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  return std::max(0.0, gain * cdf + sigma * pdf);
}

double constrained_ei(double mean, double sigma, double best, double p_feasible) {
  require(p_feasible >= 0.0 && p_feasible <= 1.0, "constrained_ei: p_feasible must lie in [0, 1]");
  return expected_improvement(mean, sigma, best) * p_feasible;
}

void FeasibilityClassifier::add(const space::Configuration &config, bool feasible) {
  configs_.push_back(config);
  feasible_.push_back(feasible);
  if (!feasible) ++infeasible_;
}

double FeasibilityClassifier::probability(const space::Configuration &config) const {
  if (infeasible_ == 0) return 1.0;
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(configs_.size());
  for (std::size_t i = 0; i < configs_.size(); ++i) d.emplace_back(space::distance(*space_, config, configs_[i]), i);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(k_), d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::size_t yes = 0;
  for (std::size_t i = 0; i < k; ++i) yes += feasible_[d[i].second] ? 1 : 0;
  return static_cast<double>(yes) / static_cast<double>(k);
}

std::optional<Point> objective_vector(const QueryResult &r, const std::vector<std::string> &objectives) {
  if (!r.feasible) return std::nullopt;
  Point p;
  for (const auto &name : objectives) {
    const auto it = r.objectives.find(name);
    if (it == r.objectives.end() || !std::isfinite(it->second)) return std::nullopt;
    p.push_back(it->second);
  }
  return p;
}

Optimizer::Optimizer(const StudyDefinition &study, std::vector<std::string> objectives, std::uint64_t seed)
    : study_(study), objectives_(std::move(objectives)), seed_(seed) {
  require(!objectives_.empty(), "optimizer needs at least one objective");
  for (const auto &o : objectives_)
    require(study_.objective_index(o).has_value(),
            "objective '" + o + "' is not declared by study '" + study_.study_id + "'");
}

void Optimizer::tell(const space::Configuration &config, const QueryResult &result) {
  Observation obs{config, {}};
  if (auto v = objective_vector(result, objectives_)) obs.values = std::move(*v);
  observations_.push_back(obs);
  observed(observations_.back());
}

RandomSearch::RandomSearch(const StudyDefinition &study, std::vector<std::string> objectives, std::uint64_t seed,
                           std::size_t budget)
    : Optimizer(study, std::move(objectives), seed) {
  require(budget >= 1, "random_search: budget must be at least 1");
  plan_ = space::sample_valid(study_.search_space, seed, budget);
}

space::Configuration RandomSearch::ask() {
  require(next_ < plan_.size(), "random_search: budget exhausted");
  return plan_[next_++];
}

Nsga2::Nsga2(const StudyDefinition &study, std::vector<std::string> objectives, std::uint64_t seed,
             Nsga2Options options)
    : Optimizer(study, std::move(objectives), seed), options_(options), rng_(Rng::mix(seed, 0x4e534741)) {
  require(options_.population >= 4 && options_.population % 2 == 0,
          "nsga2: population must be even and at least 4");
  pending_ = space::sample_valid(study_.search_space, rng_.next(), options_.population);
}

space::Configuration Nsga2::ask() {
  require(issued_ < pending_.size(), "nsga2: ask() called twice without tell()");
  return pending_[issued_++];
}

void Nsga2::observed(const Observation &obs) {
  batch_results_.push_back(obs);
  if (batch_results_.size() == pending_.size()) advance();
}

void Nsga2::assign_ranks(std::vector<Member> &members) {
  std::vector<Point> points;
  std::vector<std::size_t> feasible;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (!members[i].obs.feasible()) continue;
    feasible.push_back(i);
    points.push_back(members[i].obs.values);
  }
  const auto fronts = non_dominated_sort(points);
  for (std::size_t r = 0; r < fronts.size(); ++r) {
    std::vector<Point> front;
    for (auto i : fronts[r]) front.push_back(points[i]);
    const auto crowd = crowding_distance(front);
    for (std::size_t j = 0; j < fronts[r].size(); ++j) {
      auto &m = members[feasible[fronts[r][j]]];
      m.rank = r;
      m.crowding = crowd[j];
    }
  }
  for (auto &m : members) {
    if (m.obs.feasible()) continue;
    m.rank = fronts.size();
    m.crowding = 0.0;
  }
}

void Nsga2::advance() {
  std::vector<Member> pool;
  for (auto &p : parents_) pool.push_back({p.obs});
  for (auto &o : batch_results_) pool.push_back({o});
  assign_ranks(pool);
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pool[a].rank != pool[b].rank) return pool[a].rank < pool[b].rank;
    return pool[a].crowding > pool[b].crowding;
  });
  parents_.clear();
  for (std::size_t i = 0; i < std::min(order.size(), options_.population); ++i) parents_.push_back(pool[order[i]]);
  assign_ranks(parents_);

  std::vector<space::Configuration> children;
  while (children.size() < options_.population) {
    const auto &a = tournament();
    const auto &b = tournament();
    auto [c1, c2] = vary(a.obs.config, b.obs.config);
    children.push_back(std::move(c1));
    children.push_back(std::move(c2));
  }
  pending_ = std::move(children);
  batch_results_.clear();
  issued_ = 0;
  ++generation_;
}

const Nsga2::Member &Nsga2::tournament() {
  const auto &a = parents_[rng_.index(parents_.size())];
  const auto &b = parents_[rng_.index(parents_.size())];
  if (a.obs.feasible() != b.obs.feasible()) return a.obs.feasible() ? a : b;
  if (!a.obs.feasible()) return a;
  if (a.rank != b.rank) return a.rank < b.rank ? a : b;
  return b.crowding > a.crowding ? b : a;
}

void Nsga2::mutate(space::Configuration &c) {
  const auto &params = study_.search_space.parameters();
  const double rate = 1.0 / static_cast<double>(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!rng_.bernoulli(rate)) continue;
    const auto &p = params[i];
    switch (p.kind) {
      case space::ParamKind::ordinal: c.values[i] = p.values[rng_.index(p.values.size())]; break;
      case space::ParamKind::categorical: c.values[i] = p.labels[rng_.index(p.labels.size())]; break;
      case space::ParamKind::permutation: {
        auto &perm = std::get<space::Permutation>(c.values[i]);
        if (perm.size() < 2) break;
        const auto x = rng_.index(perm.size());
        auto y = rng_.index(perm.size() - 1);
        if (y >= x) ++y;
        std::swap(perm[x], perm[y]);
        break;
      }
    }
  }
}

std::pair<space::Configuration, space::Configuration> Nsga2::vary(const space::Configuration &a,
                                                                 const space::Configuration &b) {
  const auto &space = study_.search_space;
  const auto &params = space.parameters();
  auto offspring = [&] {
    space::Configuration x = a, y = b;
    if (rng_.bernoulli(options_.crossover_rate)) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].kind == space::ParamKind::permutation) {
          const auto &pa = std::get<space::Permutation>(a.values[i]);
          const auto &pb = std::get<space::Permutation>(b.values[i]);
          if (pa.size() < 2) continue;
          auto lo = rng_.index(pa.size());
          auto hi = rng_.index(pa.size());
          if (lo > hi) std::swap(lo, hi);
          x.values[i] = order_crossover(pa, pb, lo, hi);
          y.values[i] = order_crossover(pb, pa, lo, hi);
        } else if (rng_.bernoulli(0.5)) {
          std::swap(x.values[i], y.values[i]);
        }
      }
    }
    mutate(x);
    mutate(y);
    return std::make_pair(std::move(x), std::move(y));
  };
  std::optional<space::Configuration> first, second;
  for (int attempt = 0; attempt < options_.repair_attempts && !(first && second); ++attempt) {
    auto [x, y] = offspring();
    if (!first && space::validate(space, x).valid) first = std::move(x);
    if (!second && space::validate(space, y).valid) second = std::move(y);
  }
  if (!first) first = fresh_valid();
  if (!second) second = fresh_valid();
  return {std::move(*first), std::move(*second)};
}

space::Configuration Nsga2::fresh_valid() { return sample_one(study_.search_space, rng_); }

double chebyshev(const Point &z, const Point &weights, double rho) {
  double worst = -kInf, sum = 0.0;
  for (std::size_t m = 0; m < z.size(); ++m) {
    worst = std::max(worst, weights[m] * z[m]);
    sum += weights[m] * z[m];
  }
  return worst + rho * sum;
}

ModelBased::ModelBased(const StudyDefinition &study, std::vector<std::string> objectives, std::uint64_t seed,
                       ModelBasedOptions options)
    : Optimizer(study, std::move(objectives), seed),
      options_(options),
      rng_(Rng::mix(seed, 0x4d424f)),
      classifier_(study_.search_space, options.feasibility_k) {
  require(options_.initial_design >= 1, "model_based: initial design must be at least 1");
  require(options_.pool_size >= 1, "model_based: pool size must be at least 1");
  initial_ = space::sample_valid(study_.search_space, rng_.next(), options_.initial_design);
}

void ModelBased::observed(const Observation &obs) { classifier_.add(obs.config, obs.feasible()); }

space::Configuration ModelBased::random_unseen() {
  std::set<space::Configuration> seen;
  for (const auto &o : observations_) seen.insert(o.config);
  space::Configuration c = sample_one(study_.search_space, rng_);
  for (int attempt = 0; attempt < 100 && seen.count(c); ++attempt) c = sample_one(study_.search_space, rng_);
  return c;
}

std::size_t ModelBased::select(const Scored &scored, const Point &weights, const std::vector<Point> &observed,
                               double rho) {
  const std::size_t n = scored.means.size();
  require(n > 0, "model_based: empty candidate pool");
  const std::size_t dims = weights.size();

  if (dims >= 2) {
    std::size_t lead = 0;
    for (std::size_t c = 1; c < n; ++c) {
      const auto key = [&](std::size_t i) {
        auto k = scored.means[i];
        k.push_back(-scored.feasibility[i]);
        return k;
      };
      if (key(c) < key(lead)) lead = c;
    }
    Point lead_key = scored.means[lead];
    lead_key.push_back(-scored.feasibility[lead]);
    bool dominant = true;
    for (std::size_t c = 0; c < n && dominant; ++c) {
      if (c == lead) continue;
      Point other = scored.means[c];
      other.push_back(-scored.feasibility[c]);
      dominant = dominates(lead_key, other);
    }
    if (dominant) return lead;
  }

  double best = kInf;
  for (const auto &z : observed) best = std::min(best, chebyshev(z, weights, rho));
  std::size_t winner = 0;
  double top = -kInf;
  for (std::size_t c = 0; c < n; ++c) {
    const auto &members = scored.members[c];
    const std::size_t t_count = members.front().size();
    double mean = 0.0, sq = 0.0;
    std::vector<double> s(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
      Point z(dims);
      for (std::size_t m = 0; m < dims; ++m) z[m] = members[m][t];
      s[t] = chebyshev(z, weights, rho);
      mean += s[t];
    }
    mean /= static_cast<double>(t_count);
    for (double v : s) sq += (v - mean) * (v - mean);
    const double sigma = std::sqrt(sq / static_cast<double>(t_count));
    const double acq = constrained_ei(mean, sigma, best, scored.feasibility[c]);
    if (acq > top) {
      top = acq;
      winner = c;
    }
  }
  return winner;
}

space::Configuration ModelBased::ask() {
  if (asked_ < initial_.size()) return initial_[asked_++];
  ++asked_;
  const auto &space = study_.search_space;

  std::vector<const Observation *> feasible;
  for (const auto &o : observations_)
    if (o.feasible()) feasible.push_back(&o);
  if (feasible.size() < 2) return random_unseen();

  const std::size_t dims = objectives_.size();
  std::vector<std::vector<double>> x;
  for (const auto *o : feasible) x.push_back(space::encode(space, o->config));

  // Per objective: log-transform when all values are positive, then scale
  // observed values to [0, 1].
  std::vector<bool> logged(dims);
  std::vector<double> lo(dims, kInf), span(dims, 1.0);
  std::vector<std::vector<double>> y(dims);
  for (std::size_t m = 0; m < dims; ++m) {
    logged[m] = std::all_of(feasible.begin(), feasible.end(), [&](const Observation *o) { return o->values[m] > 0; });
    double hi = -kInf;
    for (const auto *o : feasible) {
      const double v = logged[m] ? std::log(o->values[m]) : o->values[m];
      y[m].push_back(v);
      lo[m] = std::min(lo[m], v);
      hi = std::max(hi, v);
    }
    span[m] = hi > lo[m] ? hi - lo[m] : 1.0;
    for (auto &v : y[m]) v = (v - lo[m]) / span[m];
  }
  const std::vector<double> weights_one(feasible.size(), 1.0);
  std::vector<surrogate::Forest> forests;
  for (std::size_t m = 0; m < dims; ++m)
    forests.push_back(surrogate::Forest::fit(x, y[m], weights_one, options_.forest, rng_.next()));

  std::vector<Point> observed_z(feasible.size(), Point(dims));
  for (std::size_t i = 0; i < feasible.size(); ++i)
    for (std::size_t m = 0; m < dims; ++m) observed_z[i][m] = y[m][i];

  std::set<space::Configuration> seen;
  for (const auto &o : observations_) seen.insert(o.config);
  std::vector<space::Configuration> pool;
  std::set<space::Configuration> in_pool;
  auto offer = [&](space::Configuration c) {
    if (seen.count(c) || in_pool.count(c)) return;
    in_pool.insert(c);
    pool.push_back(std::move(c));
  };
  for (auto &c : space::sample_valid(space, rng_.next(), options_.pool_size)) offer(std::move(c));
  std::vector<Point> points;
  for (const auto *o : feasible) points.push_back(o->values);
  const auto fronts = non_dominated_sort(points);
  for (auto i : fronts.front())
    for (auto &c : space::neighbors(space, feasible[i]->config))
      if (space::validate(space, c).valid) offer(std::move(c));
  if (pool.empty()) return random_unseen();

  Point weights(dims, 1.0);
  if (dims > 1) {
    double total = 0.0;
    for (auto &w : weights) total += (w = -std::log(1.0 - rng_.uniform()));
    for (auto &w : weights) w /= total;
  }

  Scored scored;
  scored.means.reserve(pool.size());
  for (const auto &c : pool) {
    const auto features = space::encode(space, c);
    Point mean(dims);
    std::vector<Point> members(dims);
    for (std::size_t m = 0; m < dims; ++m) {
      members[m] = forests[m].predict_members(features);
      mean[m] = std::accumulate(members[m].begin(), members[m].end(), 0.0) / static_cast<double>(members[m].size());
    }
    scored.means.push_back(std::move(mean));
    scored.members.push_back(std::move(members));
    scored.feasibility.push_back(classifier_.probability(c));
  }
  ++guided_;
  return pool[select(scored, weights, observed_z, options_.rho)];
}

const std::vector<std::string> &optimizer_names() {
  static const std::vector<std::string> names{"random_search", "nsga2", "model_based"};
  return names;
}

std::unique_ptr<Optimizer> make_optimizer(const std::string &name, const StudyDefinition &study,
                                          std::vector<std::string> objectives, std::uint64_t seed,
                                          std::size_t budget, const json &hyperparameters) {
  const json hp = hyperparameters.is_null() ? json::object() : hyperparameters;
  require(hp.is_object(), "optimizer hyperparameters must be an object");
  auto number = [&](const char *key, double fallback) {
    const auto it = hp.find(key);
    if (it == hp.end()) return fallback;
    require(it->is_number(), std::string("hyperparameter '") + key + "' must be a number");
    return it->get<double>();
  };
  auto count = [&](const char *key, std::size_t fallback) {
    const double v = number(key, static_cast<double>(fallback));
    require(v >= 0 && v == std::floor(v), std::string("hyperparameter '") + key + "' must be a nonnegative integer");
    return static_cast<std::size_t>(v);
  };
  static const std::set<std::string> known{"population", "crossover_rate", "repair_attempts", "initial_design",
                                           "pool_size", "trees", "rho"};
  for (auto it = hp.begin(); it != hp.end(); ++it)
    require(known.count(it.key()), "unknown optimizer hyperparameter '" + it.key() + "'");

  if (name == "random_search") return std::make_unique<RandomSearch>(study, std::move(objectives), seed, budget);
  if (name == "nsga2") {
    Nsga2Options o;
    o.population = count("population", o.population);
    o.crossover_rate = number("crossover_rate", o.crossover_rate);
    o.repair_attempts = static_cast<int>(count("repair_attempts", static_cast<std::size_t>(o.repair_attempts)));
    return std::make_unique<Nsga2>(study, std::move(objectives), seed, o);
  }
  if (name == "model_based") {
    ModelBasedOptions o;
    o.initial_design = count("initial_design", o.initial_design);
    o.pool_size = count("pool_size", o.pool_size);
    o.forest.trees = static_cast<int>(count("trees", static_cast<std::size_t>(o.forest.trees)));
    o.rho = number("rho", o.rho);
    require(budget > o.initial_design, "model_based: budget must exceed the initial design size");
    return std::make_unique<ModelBased>(study, std::move(objectives), seed, o);
  }
  throw Error(ErrorCode::invalid_argument,
              "unknown optimizer '" + name + "' (expected random_search, nsga2 or model_based)");
}

std::vector<EvaluationRecord> run_optimizer(Optimizer &optimizer, Evaluator &evaluator, std::size_t budget,
                                            std::uint64_t seed, const FidelitySettings &fidelities,
                                            const std::vector<EvaluationRecord> &replay,
                                            const std::function<void(const EvaluationRecord &)> &on_record) {
  require(replay.size() <= budget, "replayed log holds more records than the budget");
  std::vector<EvaluationRecord> out;
  const auto &study = evaluator.study();
  for (std::size_t it = 0; it < budget; ++it) {
    auto config = optimizer.ask();
    if (it < replay.size()) {
      const auto &r = replay[it];
      if (r.config != config)
        throw Error(ErrorCode::invalid_argument,
                    "log replay diverged at iteration " + std::to_string(it) + " of " + optimizer.name() +
                        " seed " + std::to_string(seed) + ": logged " + study.search_space.describe(r.config) +
                        ", optimizer asked " + study.search_space.describe(config));
      optimizer.tell(config, r.result);
      out.push_back(r);
      continue;
    }
    EvaluationRecord r;
    r.study_id = study.study_id;
    r.result = evaluator.evaluate(config, fidelities);
    r.server_label = r.result.server_label;
    r.config = std::move(config);
    r.fidelities = fidelities;
    r.optimizer = optimizer.name();
    r.seed = seed;
    r.iteration = static_cast<std::int64_t>(it);
    r.timestamp_ms = now_ms();
    if (on_record) on_record(r);
    optimizer.tell(r.config, r.result);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace catbench::optimize
