#include <cmath>

#include "catbench/kernels.hpp"

namespace catbench::kernels {

namespace {

std::vector<double> gemm(const KernelProblem &p) {
  std::vector<double> c(p.m * p.n, 0.0);
  for (std::int64_t i = 0; i < p.m; ++i)
    for (std::int64_t j = 0; j < p.n; ++j) {
      double sum = 0.0;
      for (std::int64_t k = 0; k < p.k; ++k) sum += p.a[i * p.k + k] * p.b[k * p.n + j];
      c[i * p.n + j] = sum;
    }
  return c;
}

std::vector<double> stencil(const KernelProblem &p) {
  const auto &w = p.weights;
  std::vector<double> out = p.a;
  for (std::int64_t i = 1; i + 1 < p.m; ++i)
    for (std::int64_t j = 1; j + 1 < p.n; ++j) {
      const auto at = [&](std::int64_t r, std::int64_t c) { return p.a[r * p.n + c]; };
      out[i * p.n + j] = w.center * at(i, j) + w.north * at(i - 1, j) + w.south * at(i + 1, j) +
                         w.west * at(i, j - 1) + w.east * at(i, j + 1);
    }
  return out;
}

std::vector<double> spmv(const KernelProblem &p) {
  const auto &s = p.sparse;
  std::vector<double> y(p.m, 0.0);
  for (std::int64_t i = 0; i < s.rows; ++i) {
    double sum = 0.0;
    for (auto q = s.offsets[i]; q < s.offsets[i + 1]; ++q) sum += s.values[q] * p.x[s.indices[q]];
    y[i] = sum;
  }
  return y;
}

std::vector<double> spmm(const KernelProblem &p) {
  const auto &s = p.sparse;
  std::vector<double> c(p.m * p.n, 0.0);
  for (std::int64_t i = 0; i < p.m; ++i)
    for (auto q = s.offsets[i]; q < s.offsets[i + 1]; ++q) {
      const double v = s.values[q];
      const double *brow = &p.b[static_cast<std::int64_t>(s.indices[q]) * p.n];
      for (std::int64_t j = 0; j < p.n; ++j) c[i * p.n + j] += v * brow[j];
    }
  return c;
}

std::vector<double> sddmm(const KernelProblem &p) {
  const auto &s = p.sparse;
  std::vector<double> out(s.nnz(), 0.0);
  for (std::int64_t i = 0; i < p.m; ++i)
    for (auto q = s.offsets[i]; q < s.offsets[i + 1]; ++q) {
      const std::int64_t j = s.indices[q];
      double sum = 0.0;
      for (std::int64_t k = 0; k < p.k; ++k) sum += p.c[i * p.k + k] * p.d[k * p.n + j];
      out[q] = s.values[q] * sum;
    }
  return out;
}

std::vector<double> kmeans(const KernelProblem &p) {
  const std::int64_t dims = p.n;
  const std::int64_t kc = p.clusters;
  std::vector<double> centroids(p.a.begin(), p.a.begin() + kc * dims);
  std::vector<std::int64_t> assign(p.m, 0);

  auto sq_dist = [&](std::int64_t point, std::int64_t cluster) {
    double s = 0.0;
    for (std::int64_t d = 0; d < dims; ++d) {
      const double diff = p.a[point * dims + d] - centroids[cluster * dims + d];
      s += diff * diff;
    }
    return s;
  };
  auto assign_all = [&] {
    for (std::int64_t i = 0; i < p.m; ++i) {
      std::int64_t best = 0;
      double best_d = sq_dist(i, 0);
      for (std::int64_t c = 1; c < kc; ++c) {
        const double dc = sq_dist(i, c);
        if (dc < best_d) best_d = dc, best = c;
      }
      assign[i] = best;
    }
  };

  std::vector<double> sums(kc * dims);
  std::vector<std::int64_t> counts(kc);
  for (int iter = 0; iter < kKmeansMaxIterations; ++iter) {
    assign_all();
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::int64_t i = 0; i < p.m; ++i) {
      ++counts[assign[i]];
      for (std::int64_t d = 0; d < dims; ++d) sums[assign[i] * dims + d] += p.a[i * dims + d];
    }
    double movement = 0.0;
    for (std::int64_t c = 0; c < kc; ++c) {
      if (counts[c] == 0) continue;
      double moved = 0.0;
      for (std::int64_t d = 0; d < dims; ++d) {
        const double next = sums[c * dims + d] / static_cast<double>(counts[c]);
        const double delta = next - centroids[c * dims + d];
        moved += delta * delta;
        centroids[c * dims + d] = next;
      }
      movement = std::max(movement, std::sqrt(moved));
    }
    if (movement < kKmeansTolerance) break;
  }
  assign_all();
  double objective = 0.0;
  for (std::int64_t i = 0; i < p.m; ++i) objective += sq_dist(i, assign[i]);

  std::vector<double> out;
  out.reserve(1 + centroids.size());
  out.push_back(objective);
  out.insert(out.end(), centroids.begin(), centroids.end());
  return out;
}

}  // namespace

std::vector<double> compute_reference(const KernelProblem &problem) {
  problem.check();
  switch (problem.kernel) {
    case KernelId::gemm: return gemm(problem);
    case KernelId::stencil: return stencil(problem);
    case KernelId::asum: {
      double sum = 0.0;
      for (double v : problem.x) sum += std::abs(v);
      return {sum};
    }
    case KernelId::scal: {
      std::vector<double> out(problem.x.size());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = problem.alpha * problem.x[i];
      return out;
    }
    case KernelId::spmv: return spmv(problem);
    case KernelId::spmm: return spmm(problem);
    case KernelId::sddmm: return sddmm(problem);
    case KernelId::kmeans: return kmeans(problem);
  }
  return {};
}

double relative_error(const std::vector<double> &out, const std::vector<double> &ref) {
  if (out.size() != ref.size()) return INFINITY;
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    diff = std::max(diff, std::abs(out[i] - ref[i]));
    scale = std::max(scale, std::abs(ref[i]));
  }
  if (std::isnan(diff)) return INFINITY;
  return diff / std::max(scale, 1e-300);
}

}  // namespace catbench::kernels
