#include "catbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "catbench/error.hpp"

namespace catbench::metrics {

namespace {

bool dominates(const Point &a, const Point &b) {
  bool strict = false;
  for (std::size_t m = 0; m < a.size(); ++m) {
    if (a[m] > b[m]) return false;
    if (a[m] < b[m]) strict = true;
  }
  return strict;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

std::vector<std::optional<double>> incumbent_trajectory(const std::vector<EvaluationRecord> &records,
                                                        const std::string &objective) {
  std::vector<const EvaluationRecord *> ordered;
  for (const auto &r : records) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto *a, const auto *b) { return a->iteration < b->iteration; });
  std::vector<std::optional<double>> out;
  std::optional<double> best;
  for (const auto *r : ordered) {
    if (const auto v = objective_of(*r, objective)) best = best ? std::min(*best, *v) : *v;
    out.push_back(best);
  }
  if (!best)
    throw Error(ErrorCode::insufficient_data, "no feasible record carries objective '" + objective + "'");
  return out;
}

std::vector<std::size_t> pareto_front(const std::vector<Point> &points) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool keep = true;
    for (std::size_t j = 0; j < points.size() && keep; ++j) {
      if (j == i) continue;
      if (dominates(points[j], points[i])) keep = false;
      if (j < i && points[j] == points[i]) keep = false;
    }
    if (keep) out.push_back(i);
  }
  return out;
}

Point default_reference(const std::vector<Point> &points) {
  if (points.empty()) throw Error(ErrorCode::insufficient_data, "no points to derive a reference from");
  Point ref = points.front();
  for (const auto &p : points)
    for (std::size_t m = 0; m < ref.size(); ++m) ref[m] = std::max(ref[m], p[m]);
  for (auto &r : ref) r *= 1.1;
  return ref;
}

Hypervolume hypervolume_2d(const std::vector<Point> &points, const Point &reference) {
  if (reference.size() != 2) throw Error(ErrorCode::invalid_argument, "hypervolume_2d needs a 2-objective reference");
  Hypervolume hv;
  hv.reference = reference;
  std::vector<std::pair<double, double>> clipped;
  for (const auto &p : points) {
    if (p.size() != 2) throw Error(ErrorCode::invalid_argument, "hypervolume_2d needs 2-objective points");
    if (!(p[0] < reference[0] && p[1] < reference[1])) {
      ++hv.clipped;
      continue;
    }
    clipped.emplace_back(p[0], p[1]);
  }
  std::sort(clipped.begin(), clipped.end());
  double ceiling = reference[1];
  for (const auto &[x, y] : clipped) {
    if (y >= ceiling) continue;
    hv.value += (reference[0] - x) * (ceiling - y);
    ceiling = y;
  }
  return hv;
}

SpeedupDistribution speedup_distribution(const std::vector<double> &runtimes, double baseline, int bins) {
  if (!(baseline > 0.0) || !std::isfinite(baseline))
    throw Error(ErrorCode::invalid_argument, "speedup baseline must be positive");
  if (bins < 1) throw Error(ErrorCode::invalid_argument, "speedup histogram needs at least one bin");
  if (runtimes.empty()) throw Error(ErrorCode::insufficient_data, "no feasible runtimes");
  std::vector<double> speedups, logs;
  for (double r : runtimes) {
    if (!(r > 0.0)) throw Error(ErrorCode::invalid_argument, "runtimes must be positive");
    speedups.push_back(baseline / r);
    logs.push_back(std::log10(baseline / r));
  }
  double lo = *std::min_element(logs.begin(), logs.end());
  double hi = *std::max_element(logs.begin(), logs.end());
  if (hi - lo < 1e-12) {
    lo -= 0.05;
    hi += 0.05;
  }
  SpeedupDistribution d;
  const double width = (hi - lo) / bins;
  for (int b = 0; b <= bins; ++b) d.edges.push_back(lo + width * b);
  d.edges.back() = hi;
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (double v : logs) {
    auto b = static_cast<std::size_t>(std::floor((v - lo) / width));
    ++counts[std::min(b, counts.size() - 1)];
  }
  for (auto c : counts)
    d.densities.push_back(static_cast<double>(c) / (static_cast<double>(logs.size()) * width));
  d.median = median_of(speedups);
  d.max = *std::max_element(speedups.begin(), speedups.end());
  d.count = speedups.size();
  return d;
}

std::vector<double> permutation_importance(const surrogate::SurrogateModel &model,
                                           const std::vector<EvaluationRecord> &holdout,
                                           const std::string &objective, std::uint64_t seed, int rounds) {
  if (rounds < 1) throw Error(ErrorCode::invalid_argument, "importance needs at least one round");
  std::vector<const EvaluationRecord *> rows;
  std::vector<double> targets;
  for (const auto &r : holdout)
    if (const auto v = objective_of(r, objective)) {
      rows.push_back(&r);
      targets.push_back(*v);
    }
  if (rows.size() < 20)
    throw Error(ErrorCode::insufficient_data,
                "importance needs at least 20 feasible holdout records, got " + std::to_string(rows.size()));

  auto rmse = [&](const std::vector<space::Configuration> &configs) {
    double sq = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double e = model.predict(objective, configs[i], rows[i]->fidelities) - targets[i];
      sq += e * e;
    }
    return std::sqrt(sq / static_cast<double>(rows.size()));
  };
  std::vector<space::Configuration> base;
  for (const auto *r : rows) base.push_back(r->config);
  const double reference = rmse(base);

  const auto dims = model.study().search_space.dimensions();
  std::vector<double> scores(dims, 0.0);
  for (std::size_t p = 0; p < dims; ++p) {
    double total = 0.0;
    for (int round = 0; round < rounds; ++round) {
      Rng rng(Rng::mix(seed, p * 1'000'003ULL + static_cast<std::uint64_t>(round)));
      std::vector<std::size_t> order(rows.size());
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);
      auto shuffled = base;
      for (std::size_t i = 0; i < rows.size(); ++i) shuffled[i].values[p] = base[order[i]].values[p];
      total += rmse(shuffled) - reference;
    }
    scores[p] = std::max(0.0, total / rounds);
  }
  const double sum = std::accumulate(scores.begin(), scores.end(), 0.0);
  if (sum > 0.0)
    for (auto &s : scores) s /= sum;
  return scores;
}

Band trajectory_aggregate(const std::vector<std::vector<std::optional<double>>> &trajectories) {
  if (trajectories.empty()) throw Error(ErrorCode::insufficient_data, "no trajectories to aggregate");
  std::size_t length = 0;
  for (const auto &t : trajectories) length = std::max(length, t.size());
  Band band;
  for (std::size_t i = 0; i < length; ++i) {
    std::vector<double> values;
    for (const auto &t : trajectories)
      if (i < t.size() && t[i]) values.push_back(*t[i]);
    band.seeds.push_back(values.size());
    if (values.empty()) {
      band.mean.emplace_back();
      band.lower.emplace_back();
      band.upper.emplace_back();
      continue;
    }
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double half = 0.0;
    if (values.size() > 1) {
      double sq = 0.0;
      for (double v : values) sq += (v - mean) * (v - mean);
      half = 2.0 * std::sqrt(sq / (n - 1.0)) / std::sqrt(n);
    }
    band.mean.emplace_back(mean);
    band.lower.emplace_back(mean - half);
    band.upper.emplace_back(mean + half);
  }
  return band;
}

std::pair<std::vector<EvaluationRecord>, std::vector<EvaluationRecord>> split_records(
    const std::vector<EvaluationRecord> &records, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction >= 0.0 && holdout_fraction <= 1.0))
    throw Error(ErrorCode::invalid_argument, "holdout fraction must lie in [0, 1]");
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const auto cut = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(records.size())));
  std::vector<bool> held(records.size(), false);
  for (std::size_t i = 0; i < cut; ++i) held[order[i]] = true;
  std::pair<std::vector<EvaluationRecord>, std::vector<EvaluationRecord>> out;
  for (std::size_t i = 0; i < records.size(); ++i) (held[i] ? out.second : out.first).push_back(records[i]);
  return out;
}

double wilcoxon_signed_rank(const std::vector<double> &x, const std::vector<double> &y) {
  if (x.size() != y.size()) throw Error(ErrorCode::invalid_argument, "wilcoxon: samples differ in length");
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != y[i]) d.push_back(x[i] - y[i]);
  const std::size_t n = d.size();
  if (n == 0) return 1.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<double> rank(n);
  bool ties = false;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    const double t = static_cast<double>(j - i + 1);
    if (t > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    i = j + 1;
  }
  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) w_plus += rank[i];

  if (!ties && n <= 25) {
    const std::size_t top = n * (n + 1) / 2;
    std::vector<double> ways(top + 1, 0.0);
    ways[0] = 1.0;
    for (std::size_t r = 1; r <= n; ++r)
      for (std::size_t w = top; w >= r; --w) ways[w] += ways[w - r];
    const double total = std::ldexp(1.0, static_cast<int>(n));
    const auto w = static_cast<std::size_t>(std::llround(w_plus));
    double below = 0.0, above = 0.0;
    for (std::size_t v = 0; v <= top; ++v) {
      if (v <= w) below += ways[v];
      if (v >= w) above += ways[v];
    }
    return std::min(1.0, 2.0 * std::min(below, above) / total);
  }
  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1) / 4.0;
  const double var = nn * (nn + 1) * (2 * nn + 1) / 24.0 - tie_term / 48.0;
  if (var <= 0) return 1.0;
  const double z = (std::abs(w_plus - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, 2.0 * (1.0 - normal_cdf(std::max(0.0, z))));
}

}  // namespace catbench::metrics
