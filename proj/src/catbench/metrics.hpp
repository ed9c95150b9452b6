#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "catbench/records.hpp"
#include "catbench/surrogate.hpp"

namespace catbench::metrics {

using Point = std::vector<double>;

// Best feasible value so far per iteration; nullopt before the first
// feasible record. Records are ordered by iteration. Throws
// insufficient_data without a feasible record.
std::vector<std::optional<double>> incumbent_trajectory(const std::vector<EvaluationRecord> &records,
                                                        const std::string &objective);

// Indices of the non-dominated points (minimization); among equal points
// only the first is kept. Output is in input order.
std::vector<std::size_t> pareto_front(const std::vector<Point> &points);

struct Hypervolume {
  double value = 0.0;
  Point reference;
  std::size_t clipped = 0;  // points that did not strictly dominate the reference
};

// Exact dominated area for two objectives. Coordinates beyond the reference
// are clipped to it, which removes the point's contribution.
Hypervolume hypervolume_2d(const std::vector<Point> &points, const Point &reference);

// 1.1 times the per-objective maximum.
Point default_reference(const std::vector<Point> &points);

struct SpeedupDistribution {
  std::vector<double> edges;      // log10(speedup) bin edges
  std::vector<double> densities;  // per unit of log10(speedup), integrating to 1
  double median = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

// speedup = baseline / runtime; fixed-width bins in log10(speedup). A
// degenerate range is widened to +-0.05 decades.
SpeedupDistribution speedup_distribution(const std::vector<double> &runtimes, double baseline, int bins = 20);

// Mean increase in holdout RMSE when one parameter's values are shuffled
// across the holdout records, clipped at 0 and normalized to sum 1 when the
// total is positive. One entry per parameter, in space order.
std::vector<double> permutation_importance(const surrogate::SurrogateModel &model,
                                           const std::vector<EvaluationRecord> &holdout,
                                           const std::string &objective, std::uint64_t seed, int rounds);

struct Band {
  std::vector<std::optional<double>> mean, lower, upper;
  std::vector<std::size_t> seeds;  // contributing trajectories per iteration
};

// Pointwise mean and mean +- 2 standard errors over the trajectories that
// hold a value at that iteration. A single value gives a zero-width band.
Band trajectory_aggregate(const std::vector<std::vector<std::optional<double>>> &trajectories);

// Deterministic split of records into (train, holdout) with the given holdout
// fraction.
std::pair<std::vector<EvaluationRecord>, std::vector<EvaluationRecord>> split_records(
    const std::vector<EvaluationRecord> &records, double holdout_fraction, std::uint64_t seed);

// Two-sided Wilcoxon signed-rank p-value for paired samples; exact for up to
// 25 nonzero differences without ties, normal approximation otherwise. Zero
// differences are dropped.
double wilcoxon_signed_rank(const std::vector<double> &x, const std::vector<double> &y);

}  // namespace catbench::metrics
