#include <algorithm>
#include <cmath>
#include <numeric>

#include "catbench/error.hpp"
#include "catbench/kernels.hpp"
#include "catbench/rng.hpp"

namespace catbench::kernels {

namespace {

[[noreturn]] void malformed(const std::string &what) {
  throw Error(ErrorCode::malformed_problem, what);
}

std::int64_t size_of(const std::map<std::string, double> &sizes, const char *key,
                     std::optional<std::int64_t> fallback = std::nullopt) {
  auto it = sizes.find(key);
  if (it == sizes.end()) {
    if (fallback) return *fallback;
    malformed(std::string("missing size '") + key + "'");
  }
  const auto v = static_cast<std::int64_t>(std::llround(it->second));
  if (v < 1) malformed(std::string("size '") + key + "' must be positive");
  return v;
}

std::vector<double> uniform_values(Rng &rng, std::size_t count) {
  std::vector<double> v(count);
  for (auto &e : v) e = rng.uniform(-1.0, 1.0);
  return v;
}

CsrMatrix random_csr(Rng &rng, std::int64_t rows, std::int64_t cols, double density) {
  CsrMatrix s;
  s.rows = rows;
  s.cols = cols;
  const auto per_row = nonzeros_per_row(density, cols);
  s.offsets.reserve(rows + 1);
  s.offsets.push_back(0);
  std::vector<std::int32_t> picked;
  for (std::int64_t r = 0; r < rows; ++r) {
    // Floyd's algorithm: per_row distinct columns.
    picked.clear();
    for (std::int64_t j = cols - per_row; j < cols; ++j) {
      auto t = static_cast<std::int32_t>(rng.index(static_cast<std::uint64_t>(j + 1)));
      if (std::find(picked.begin(), picked.end(), t) != picked.end())
        t = static_cast<std::int32_t>(j);
      picked.push_back(t);
    }
    std::sort(picked.begin(), picked.end());
    for (auto c : picked) {
      s.indices.push_back(c);
      s.values.push_back(rng.uniform(-1.0, 1.0));
    }
    s.offsets.push_back(static_cast<std::int64_t>(s.indices.size()));
  }
  return s;
}

}  // namespace

std::string_view to_string(KernelId id) {
  switch (id) {
    case KernelId::gemm: return "gemm";
    case KernelId::stencil: return "stencil";
    case KernelId::asum: return "asum";
    case KernelId::scal: return "scal";
    case KernelId::spmv: return "spmv";
    case KernelId::spmm: return "spmm";
    case KernelId::sddmm: return "sddmm";
    case KernelId::kmeans: return "kmeans";
  }
  return "?";
}

KernelId parse_kernel_id(std::string_view name) {
  for (auto id : all_kernels())
    if (to_string(id) == name) return id;
  throw Error(ErrorCode::invalid_argument, "unknown kernel '" + std::string(name) + "'");
}

const std::vector<KernelId> &all_kernels() {
  static const std::vector<KernelId> ids = {KernelId::gemm, KernelId::stencil, KernelId::asum,
                                            KernelId::scal, KernelId::spmv,    KernelId::spmm,
                                            KernelId::sddmm, KernelId::kmeans};
  return ids;
}

std::int64_t nonzeros_per_row(double density, std::int64_t cols) {
  const auto per_row = static_cast<std::int64_t>(std::llround(density * static_cast<double>(cols)));
  return std::clamp<std::int64_t>(per_row, 1, cols);
}

CsrMatrix CsrMatrix::identity(std::int64_t n) {
  CsrMatrix s;
  s.rows = s.cols = n;
  for (std::int64_t i = 0; i <= n; ++i) s.offsets.push_back(i);
  for (std::int64_t i = 0; i < n; ++i) {
    s.indices.push_back(static_cast<std::int32_t>(i));
    s.values.push_back(1.0);
  }
  return s;
}

void CsrMatrix::check() const {
  if (rows < 0 || cols < 0) malformed("CSR: negative dimension");
  if (static_cast<std::int64_t>(offsets.size()) != rows + 1) malformed("CSR: offsets length != rows + 1");
  if (offsets.front() != 0) malformed("CSR: offsets must start at 0");
  if (indices.size() != values.size()) malformed("CSR: indices/values length mismatch");
  if (offsets.back() != static_cast<std::int64_t>(values.size())) malformed("CSR: last offset != nnz");
  for (std::int64_t r = 0; r < rows; ++r) {
    if (offsets[r + 1] < offsets[r]) malformed("CSR: offsets must be nondecreasing");
    for (auto p = offsets[r]; p < offsets[r + 1]; ++p) {
      if (indices[p] < 0 || indices[p] >= cols) malformed("CSR: column index out of range");
      if (p > offsets[r] && indices[p] <= indices[p - 1])
        malformed("CSR: column indices must be strictly increasing within a row");
    }
  }
}

void KernelProblem::check() const {
  auto need = [](bool ok, const char *what) {
    if (!ok) malformed(what);
  };
  switch (kernel) {
    case KernelId::gemm:
      need(a.size() == static_cast<std::size_t>(m * k), "gemm: A must be m x k");
      need(b.size() == static_cast<std::size_t>(k * n), "gemm: B must be k x n");
      break;
    case KernelId::stencil:
      need(m >= 1 && n >= 1, "stencil: empty grid");
      need(a.size() == static_cast<std::size_t>(m * n), "stencil: A must be m x n");
      break;
    case KernelId::asum:
    case KernelId::scal:
      need(x.size() == static_cast<std::size_t>(n), "vector length must equal n");
      break;
    case KernelId::spmv:
      sparse.check();
      need(sparse.rows == m && sparse.cols == n, "spmv: S must be m x n");
      need(x.size() == static_cast<std::size_t>(n), "spmv: x must have length n");
      break;
    case KernelId::spmm:
      sparse.check();
      need(sparse.rows == m && sparse.cols == k, "spmm: S must be m x k");
      need(b.size() == static_cast<std::size_t>(k * n), "spmm: B must be k x n");
      break;
    case KernelId::sddmm:
      sparse.check();
      need(sparse.rows == m && sparse.cols == n, "sddmm: S must be m x n");
      need(c.size() == static_cast<std::size_t>(m * k), "sddmm: C must be m x k");
      need(d.size() == static_cast<std::size_t>(k * n), "sddmm: D must be k x n");
      break;
    case KernelId::kmeans:
      need(a.size() == static_cast<std::size_t>(m * n), "kmeans: points must be m x n");
      need(clusters >= 1 && clusters <= m, "kmeans: need 1 <= K <= number of points");
      break;
  }
}

KernelProblem generate_problem(KernelId kernel, const std::map<std::string, double> &sizes,
                               std::uint64_t seed) {
  KernelProblem p;
  p.kernel = kernel;
  p.seed = seed;
  Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(kernel)));
  const double density = sizes.count("density") ? sizes.at("density") : 0.01;
  switch (kernel) {
    case KernelId::gemm: {
      const auto n = size_of(sizes, "n");
      p.m = size_of(sizes, "m", n);
      p.k = size_of(sizes, "k", n);
      p.n = n;
      p.a = uniform_values(rng, p.m * p.k);
      p.b = uniform_values(rng, p.k * p.n);
      break;
    }
    case KernelId::stencil:
      p.m = size_of(sizes, "rows");
      p.n = size_of(sizes, "cols");
      p.a = uniform_values(rng, p.m * p.n);
      p.weights = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                   rng.uniform(-1, 1), rng.uniform(-1, 1)};
      break;
    case KernelId::asum:
    case KernelId::scal:
      p.n = size_of(sizes, "n");
      p.x = uniform_values(rng, p.n);
      p.alpha = rng.uniform(-1.0, 1.0);
      break;
    case KernelId::spmv:
      p.m = size_of(sizes, "rows");
      p.n = size_of(sizes, "cols");
      p.sparse = random_csr(rng, p.m, p.n, density);
      p.x = uniform_values(rng, p.n);
      break;
    case KernelId::spmm:
      p.m = size_of(sizes, "rows");
      p.k = size_of(sizes, "inner");
      p.n = size_of(sizes, "cols");
      p.sparse = random_csr(rng, p.m, p.k, density);
      p.b = uniform_values(rng, p.k * p.n);
      break;
    case KernelId::sddmm:
      p.m = size_of(sizes, "rows");
      p.n = size_of(sizes, "cols");
      p.k = size_of(sizes, "inner");
      p.sparse = random_csr(rng, p.m, p.n, density);
      p.c = uniform_values(rng, p.m * p.k);
      p.d = uniform_values(rng, p.k * p.n);
      break;
    case KernelId::kmeans:
      p.m = size_of(sizes, "points");
      p.n = size_of(sizes, "dims");
      p.clusters = size_of(sizes, "k");
      p.a = uniform_values(rng, p.m * p.n);
      break;
  }
  p.check();
  return p;
}

}  // namespace catbench::kernels
