#include "catbench/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "catbench/error.hpp"

namespace catbench::surrogate {

namespace {

struct TreeBuilder {
  const std::vector<std::vector<double>> &x;
  const std::vector<double> &y;
  const std::vector<double> &w;
  const ForestOptions &options;
  Rng &rng;
  std::vector<RegressionTree::Node> nodes;
  std::vector<int> features;

  int build(std::vector<int> &rows, int depth) {
    double sw = 0, swy = 0, swyy = 0;
    for (int r : rows) {
      sw += w[r];
      swy += w[r] * y[r];
      swyy += w[r] * y[r] * y[r];
    }
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({});
    nodes[id].value = swy / sw;
    const double sse = swyy - swy * swy / sw;
    if (depth >= options.max_depth || sw < 2.0 * options.min_leaf ||
        sse <= 1e-12 * std::max(1.0, std::abs(swyy)))
      return id;

    std::vector<int> candidates = features;
    std::size_t tried = candidates.size();
    if (options.feature_fraction < 1.0) {
      tried = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::lround(options.feature_fraction * candidates.size())));
      for (std::size_t i = 0; i < tried; ++i)
        std::swap(candidates[i], candidates[i + rng.index(candidates.size() - i)]);
      std::sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(tried));
    }

    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<int> order = rows;
    for (std::size_t c = 0; c < tried; ++c) {
      const int f = candidates[c];
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x[a][f] < x[b][f]; });
      double lw = 0, lwy = 0, lwyy = 0;
      for (std::size_t p = 0; p + 1 < order.size(); ++p) {
        const int r = order[p];
        lw += w[r];
        lwy += w[r] * y[r];
        lwyy += w[r] * y[r] * y[r];
        const double here = x[r][f], next = x[order[p + 1]][f];
        if (!(here < next)) continue;
        const double rw = sw - lw;
        if (lw < options.min_leaf || rw < options.min_leaf) continue;
        const double rwy = swy - lwy, rwyy = swyy - lwyy;
        const double child = (lwyy - lwy * lwy / lw) + (rwyy - rwy * rwy / rw);
        const double gain = sse - child;
        if (gain > best_gain * (1.0 + 1e-12) + 1e-300) {
          best_gain = gain;
          best_feature = f;
          best_threshold = 0.5 * (here + next);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<int> left, right;
    for (int r : rows) (x[r][best_feature] <= best_threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(left, depth + 1);
    const int rr = build(right, depth + 1);
    nodes[id].feature = best_feature;
    nodes[id].threshold = best_threshold;
    nodes[id].left = l;
    nodes[id].right = rr;
    return id;
  }
};

}  // namespace

RegressionTree RegressionTree::fit(const std::vector<std::vector<double>> &x, const std::vector<double> &y,
                                   const std::vector<double> &weights, const ForestOptions &options,
                                   Rng &rng) {
  if (x.empty() || x.size() != y.size() || y.size() != weights.size())
    throw Error(ErrorCode::invalid_argument, "regression tree: inconsistent training data");
  TreeBuilder b{x, y, weights, options, rng, {}, {}};
  b.features.resize(x.front().size());
  std::iota(b.features.begin(), b.features.end(), 0);
  std::vector<int> rows;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (weights[i] > 0) rows.push_back(static_cast<int>(i));
  if (rows.empty()) throw Error(ErrorCode::insufficient_data, "regression tree: no weighted rows");
  b.build(rows, 0);
  RegressionTree t;
  t.nodes_ = std::move(b.nodes);
  return t;
}

double RegressionTree::predict(const std::vector<double> &features) const {
  int n = 0;
  while (nodes_[n].feature >= 0)
    n = features[nodes_[n].feature] <= nodes_[n].threshold ? nodes_[n].left : nodes_[n].right;
  return nodes_[n].value;
}

json RegressionTree::to_json() const {
  json out = json::array();
  for (const auto &n : nodes_) out.push_back({n.feature, n.threshold, n.left, n.right, n.value});
  return out;
}

RegressionTree RegressionTree::from_json(const json &j) {
  RegressionTree t;
  for (const auto &e : j)
    t.nodes_.push_back({e.at(0).get<int>(), e.at(1).get<double>(), e.at(2).get<int>(),
                        e.at(3).get<int>(), e.at(4).get<double>()});
  const int n = static_cast<int>(t.nodes_.size());
  if (n == 0) throw Error(ErrorCode::parse, "regression tree: empty");
  for (int i = 0; i < n; ++i) {
    const auto &node = t.nodes_[i];
    if (node.feature >= 0 && (node.left <= i || node.right <= i || node.left >= n || node.right >= n))
      throw Error(ErrorCode::parse, "regression tree: child index out of order");
  }
  return t;
}

Forest Forest::fit(const std::vector<std::vector<double>> &x, const std::vector<double> &y,
                   const std::vector<double> &weights, const ForestOptions &options, std::uint64_t seed) {
  if (options.trees < 1 || options.max_depth < 0 || options.min_leaf < 1 ||
      !(options.feature_fraction > 0.0 && options.feature_fraction <= 1.0))
    throw Error(ErrorCode::invalid_argument, "forest: invalid options");
  Forest f;
  for (int t = 0; t < options.trees; ++t) {
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(t)));
    std::vector<double> w = weights;
    if (options.bootstrap && x.size() > 1) {
      std::vector<double> counts(x.size(), 0.0);
      for (std::size_t i = 0; i < x.size(); ++i) counts[rng.index(x.size())] += 1.0;
      for (std::size_t i = 0; i < w.size(); ++i) w[i] *= counts[i];
      if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; })) w = weights;
    }
    f.trees_.push_back(RegressionTree::fit(x, y, w, options, rng));
  }
  return f;
}

double Forest::predict(const std::vector<double> &features) const {
  double s = 0.0;
  for (const auto &t : trees_) s += t.predict(features);
  return s / static_cast<double>(trees_.size());
}

std::vector<double> Forest::predict_members(const std::vector<double> &features) const {
  std::vector<double> out;
  out.reserve(trees_.size());
  for (const auto &t : trees_) out.push_back(t.predict(features));
  return out;
}

json Forest::to_json() const {
  json out = json::array();
  for (const auto &t : trees_) out.push_back(t.to_json());
  return out;
}

Forest Forest::from_json(const json &j) {
  Forest f;
  for (const auto &t : j) f.trees_.push_back(RegressionTree::from_json(t));
  if (f.trees_.empty()) throw Error(ErrorCode::parse, "forest: no trees");
  return f;
}

NearestNeighbors::NearestNeighbors(const space::SearchSpace &space, std::vector<Point> points, int k)
    : space_(&space), k_(k) {
  if (k < 1) throw Error(ErrorCode::invalid_argument, "k-NN: k must be >= 1");
  std::map<std::pair<space::Configuration, std::vector<double>>, std::size_t> index;
  std::vector<double> sums;
  for (auto &p : points) {
    auto key = std::make_pair(p.config, p.fidelity_features);
    auto [it, fresh] = index.emplace(std::move(key), points_.size());
    if (fresh) {
      sums.push_back(p.weight * p.target);
      points_.push_back(std::move(p));
    } else {
      sums[it->second] += p.weight * p.target;
      points_[it->second].weight += p.weight;
    }
  }
  for (std::size_t i = 0; i < points_.size(); ++i) points_[i].target = sums[i] / points_[i].weight;
  if (points_.empty()) throw Error(ErrorCode::insufficient_data, "k-NN: no training points");
}

double NearestNeighbors::point_distance(const space::Configuration &config,
                                        const std::vector<double> &fidelity_features,
                                        const Point &p) const {
  const double dims = static_cast<double>(space_->dimensions());
  double total = space_->dimensions() ? space::distance(*space_, config, p.config) * dims : 0.0;
  for (std::size_t i = 0; i < fidelity_features.size() && i < p.fidelity_features.size(); ++i)
    total += std::abs(fidelity_features[i] - p.fidelity_features[i]);
  const double denom = dims + static_cast<double>(fidelity_features.size());
  return denom > 0 ? total / denom : 0.0;
}

double NearestNeighbors::predict(const space::Configuration &config,
                                 const std::vector<double> &fidelity_features) const {
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i)
    ranked.emplace_back(point_distance(config, fidelity_features, points_[i]), i);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(k_), ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end());
  double s = 0, sw = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const auto &p = points_[ranked[i].second];
    s += p.weight * p.target;
    sw += p.weight;
  }
  return s / sw;
}

std::string_view to_string(ModelKind kind) { return kind == ModelKind::knn ? "knn" : "ensemble"; }

ModelKind parse_model_kind(std::string_view text) {
  if (text == "ensemble") return ModelKind::ensemble;
  if (text == "knn") return ModelKind::knn;
  throw Error(ErrorCode::invalid_argument, "unknown surrogate model '" + std::string(text) + "'");
}

std::vector<double> features(const StudyDefinition &study, const space::Configuration &config,
                             const FidelitySettings &fidelities) {
  auto out = space::encode(study.search_space, config);
  const auto f = fidelity_features(study, fidelities);
  out.insert(out.end(), f.begin(), f.end());
  return out;
}

SurrogateModel SurrogateModel::fit(const StudyDefinition &study, const std::vector<EvaluationRecord> &records,
                                   const std::vector<std::string> &objectives, std::uint64_t seed,
                                   FitOptions options) {
  if (objectives.empty()) throw Error(ErrorCode::invalid_argument, "surrogate: no objectives requested");
  for (const auto &o : objectives)
    if (!study.objective_index(o))
      throw Error(ErrorCode::invalid_argument, "surrogate: study has no objective '" + o + "'");

  std::vector<const EvaluationRecord *> usable;
  for (const auto &r : records) {
    if (!r.result.feasible) continue;
    bool complete = true;
    for (const auto &o : objectives) {
      const auto v = objective_of(r, o);
      complete = complete && v && std::isfinite(*v);
    }
    if (complete) usable.push_back(&r);
  }
  if (usable.size() < std::max<std::size_t>(options.min_records, 1))
    throw Error(ErrorCode::insufficient_data,
                "surrogate: " + std::to_string(usable.size()) + " feasible records, need " +
                    std::to_string(options.min_records));

  SurrogateModel m;
  m.study_ = std::make_shared<const StudyDefinition>(study);
  m.objectives_ = objectives;
  m.options_ = options;
  m.record_count_ = usable.size();
  m.seed_ = seed;

  std::vector<std::vector<double>> x;
  std::vector<double> weights(usable.size(), 1.0);
  if (options.kind == ModelKind::ensemble)
    for (const auto *r : usable) x.push_back(features(*m.study_, r->config, r->fidelities));

  for (std::size_t oi = 0; oi < objectives.size(); ++oi) {
    const auto &o = objectives[oi];
    std::vector<double> y;
    for (const auto *r : usable) {
      const double v = r->result.objectives.at(o);
      y.push_back(options.log_target ? std::log(std::max(v, 1e-300)) : v);
    }
    Regressor reg;
    if (options.kind == ModelKind::ensemble) {
      reg.forest = Forest::fit(x, y, weights, options.forest, Rng::mix(seed, oi));
    } else {
      std::vector<NearestNeighbors::Point> points;
      for (std::size_t i = 0; i < usable.size(); ++i)
        points.push_back({usable[i]->config, fidelity_features(*m.study_, usable[i]->fidelities), y[i], 1.0});
      reg.knn = NearestNeighbors(m.study_->search_space, std::move(points), options.knn_k);
    }
    m.regressors_.emplace(o, std::move(reg));
  }
  return m;
}

const SurrogateModel::Regressor &SurrogateModel::regressor(const std::string &objective) const {
  auto it = regressors_.find(objective);
  if (it == regressors_.end())
    throw Error(ErrorCode::invalid_argument, "surrogate: objective '" + objective + "' was not fitted");
  return it->second;
}

double SurrogateModel::untransform(double v) const { return options_.log_target ? std::exp(v) : v; }

std::vector<double> SurrogateModel::predict_members(const std::string &objective,
                                                    const space::Configuration &config,
                                                    const FidelitySettings &fidelities) const {
  const auto &reg = regressor(objective);
  std::vector<double> out;
  if (options_.kind == ModelKind::ensemble) {
    out = reg.forest.predict_members(features(*study_, config, fidelities));
  } else {
    out.push_back(reg.knn.predict(config, fidelity_features(*study_, fidelities)));
  }
  for (auto &v : out) v = untransform(v);
  return out;
}

double SurrogateModel::predict(const std::string &objective, const space::Configuration &config,
                               const FidelitySettings &fidelities) const {
  const auto &reg = regressor(objective);
  if (options_.kind == ModelKind::ensemble)
    return untransform(reg.forest.predict(features(*study_, config, fidelities)));
  return untransform(reg.knn.predict(config, fidelity_features(*study_, fidelities)));
}

QueryResult SurrogateModel::predict(const space::Configuration &config,
                                    const FidelitySettings &fidelities) const {
  QueryResult r;
  r.feasible = true;
  for (const auto &o : objectives_) r.objectives[o] = predict(o, config, fidelities);
  return r;
}

json SurrogateModel::to_json() const {
  json regs = json::object();
  for (const auto &[name, reg] : regressors_) {
    if (options_.kind == ModelKind::ensemble) {
      regs[name] = reg.forest.to_json();
      continue;
    }
    json points = json::array();
    for (const auto &p : reg.knn.points())
      points.push_back({{"config", study_->search_space.config_to_json(p.config)},
                        {"fidelity_features", p.fidelity_features},
                        {"target", p.target},
                        {"weight", p.weight}});
    regs[name] = points;
  }
  return {{"format", "catbench-surrogate"},
          {"version", 1},
          {"study", study_->document},
          {"kind", std::string(to_string(options_.kind))},
          {"knn_k", options_.knn_k},
          {"log_target", options_.log_target},
          {"objectives", objectives_},
          {"record_count", record_count_},
          {"seed", seed_},
          {"regressors", regs}};
}

SurrogateModel SurrogateModel::from_json(const json &j) {
  try {
    if (j.at("format") != "catbench-surrogate" || j.at("version") != 1)
      throw Error(ErrorCode::parse, "not a catbench surrogate model document");
    SurrogateModel m;
    m.study_ = std::make_shared<const StudyDefinition>(parse_study(j.at("study")));
    m.options_.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.options_.knn_k = j.at("knn_k").get<int>();
    m.options_.log_target = j.at("log_target").get<bool>();
    m.objectives_ = j.at("objectives").get<std::vector<std::string>>();
    m.record_count_ = j.at("record_count").get<std::size_t>();
    m.seed_ = j.at("seed").get<std::uint64_t>();
    for (const auto &o : m.objectives_) {
      const auto &doc = j.at("regressors").at(o);
      Regressor reg;
      if (m.options_.kind == ModelKind::ensemble) {
        reg.forest = Forest::from_json(doc);
      } else {
        std::vector<NearestNeighbors::Point> points;
        for (const auto &p : doc)
          points.push_back({m.study_->search_space.config_from_json(p.at("config")),
                            p.at("fidelity_features").get<std::vector<double>>(), p.at("target").get<double>(),
                            p.at("weight").get<double>()});
        reg.knn = NearestNeighbors(m.study_->search_space, std::move(points), m.options_.knn_k);
      }
      m.regressors_.emplace(o, std::move(reg));
    }
    return m;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::parse, std::string("surrogate model: ") + e.what());
  } catch (const InvalidConfigError &e) {
    throw Error(ErrorCode::parse, std::string("surrogate model: ") + e.what());
  }
}

double r2(const std::vector<double> &predictions, const std::vector<double> &targets) {
  if (predictions.size() != targets.size())
    throw Error(ErrorCode::invalid_argument, "r2: prediction and target counts differ");
  if (targets.size() < 2) throw Error(ErrorCode::insufficient_data, "r2: need at least two values");
  const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ss_res += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
    ss_tot += (targets[i] - mean) * (targets[i] - mean);
  }
  if (!(ss_tot > 0)) throw Error(ErrorCode::undefined_score, "r2: holdout targets have zero variance");
  return 1.0 - ss_res / ss_tot;
}

double r2_score(const SurrogateModel &model, const std::vector<EvaluationRecord> &holdout,
                const std::string &objective) {
  std::vector<double> predictions, targets;
  for (const auto &r : holdout) {
    const auto v = objective_of(r, objective);
    if (!v) continue;
    targets.push_back(*v);
    predictions.push_back(model.predict(objective, r.config, r.fidelities));
  }
  return r2(predictions, targets);
}

}  // namespace catbench::surrogate
