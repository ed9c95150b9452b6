#include <algorithm>
#include <cmath>

#include "catbench/kernels.hpp"

namespace catbench::kernels {

namespace {

double size_or(const std::map<std::string, double> &sizes, const char *key, double fallback) {
  auto it = sizes.find(key);
  return it == sizes.end() ? fallback : std::round(it->second);
}

double csr_bytes(double nnz, double rows) { return 12.0 * nnz + 8.0 * (rows + 1.0); }

bool is_order(const std::vector<int> &order, std::initializer_list<int> expected) {
  return order.size() == expected.size() && std::equal(order.begin(), order.end(), expected.begin());
}

// The operand not indexed by the outermost loop is re-streamed once per
// outer step; a resident outer tile divides the number of passes.
double gemm_traffic(const TuningKnobs &t, const TrafficInputs &in) {
  const double n = size_or(in.sizes, "n", 1);
  const double dim[3] = {size_or(in.sizes, "m", n), n, size_or(in.sizes, "k", n)};
  const double tile[3] = {static_cast<double>(t.tile_i), static_cast<double>(t.tile_j),
                          static_cast<double>(t.tile_k)};
  const int outer = t.loop_order.size() == 3 ? t.loop_order[0] : 0;
  const double m = dim[0], nn = dim[1], k = dim[2];
  const double a = m * k, b = k * nn, c = m * nn;
  const double sizes_by_missing[3] = {b, a, c};  // operand without index 0 / 1 / 2
  const double others = dim[0] + dim[1] + dim[2] - dim[outer];
  double r = 1.0;
  if (tile[outer] > 0) {
    const double rt = std::min(tile[outer], dim[outer]);
    if (8.0 * rt * others <= static_cast<double>(in.llc_bytes)) r = rt;
  }
  const double passes = std::ceil(dim[outer] / r);
  return 8.0 * (passes * sizes_by_missing[outer] + (a + b + c - sizes_by_missing[outer]));
}

double stencil_traffic(const TuningKnobs &t, const TrafficInputs &in) {
  const double rows = size_or(in.sizes, "rows", 1), cols = size_or(in.sizes, "cols", 1);
  const double llc = static_cast<double>(in.llc_bytes);
  const bool i_outer = t.loop_order.size() != 2 || t.loop_order[0] == 0;
  double reads = 1.0;
  if (i_outer) {
    const double width = t.tile_j > 0 ? std::min<double>(t.tile_j, cols) : cols;
    if (8.0 * 3.0 * width > llc) reads = 3.0;
  } else {
    const double height = t.tile_i > 0 ? std::min<double>(t.tile_i, rows) : rows;
    if (64.0 * (height + 2.0) > llc) reads = 8.0;
  }
  return 8.0 * (reads * rows * cols + rows * cols);
}

double spmv_traffic(const TuningKnobs &t, const TrafficInputs &in) {
  const double rows = size_or(in.sizes, "rows", 1), cols = size_or(in.sizes, "cols", 1);
  const double density = in.sizes.count("density") ? in.sizes.at("density") : 0.01;
  const double nnz = rows * static_cast<double>(nonzeros_per_row(density, static_cast<std::int64_t>(cols)));
  return csr_bytes(nnz, rows) + 8.0 * cols * t.threads + 8.0 * rows;
}

double spmm_traffic(const TuningKnobs &t, const TrafficInputs &in) {
  const double m = size_or(in.sizes, "rows", 1), k = size_or(in.sizes, "inner", 1);
  const double n = size_or(in.sizes, "cols", 1);
  const double density = in.sizes.count("density") ? in.sizes.at("density") : 0.01;
  const double nnz = m * static_cast<double>(nonzeros_per_row(density, static_cast<std::int64_t>(k)));
  const double b_bytes = 8.0 * k * n;
  const bool b_resident = b_bytes <= static_cast<double>(in.llc_bytes);
  const double tj = t.tile_j > 0 ? std::min<double>(t.tile_j, n) : n;
  const double out = 8.0 * m * n;
  if (is_order(t.loop_order, {2, 0, 1})) {
    const double tiles = std::ceil(n / tj);
    return tiles * csr_bytes(nnz, m) + b_bytes + out;
  }
  if (is_order(t.loop_order, {0, 2, 1}))
    return csr_bytes(nnz, m) + (b_resident ? b_bytes : 64.0 * nnz * n) + out;
  return csr_bytes(nnz, m) + (b_resident ? b_bytes : 8.0 * nnz * n) + out;
}

double sddmm_traffic(const TuningKnobs &t, const TrafficInputs &in) {
  const double m = size_or(in.sizes, "rows", 1), n = size_or(in.sizes, "cols", 1);
  const double k = size_or(in.sizes, "inner", 1);
  const double density = in.sizes.count("density") ? in.sizes.at("density") : 0.01;
  const double nnz = m * static_cast<double>(nonzeros_per_row(density, static_cast<std::int64_t>(n)));
  const double d_bytes = 8.0 * k * n;
  const double tk = t.tile_k > 0 ? std::min<double>(t.tile_k, k) : k;
  const bool k_outer = t.loop_order.size() == 2 && t.loop_order[0] == 1;
  double d_traffic = d_bytes;
  if (d_bytes > static_cast<double>(in.llc_bytes))
    d_traffic = k_outer ? 8.0 * nnz * k : 64.0 * nnz * tk * std::ceil(k / tk);
  return csr_bytes(nnz, m) + 8.0 * m * k + d_traffic + 8.0 * nnz;
}

}  // namespace

double traffic_model(KernelId kernel, const TuningKnobs &knobs, const TrafficInputs &inputs) {
  switch (kernel) {
    case KernelId::gemm: return gemm_traffic(knobs, inputs);
    case KernelId::stencil: return stencil_traffic(knobs, inputs);
    case KernelId::asum: return 8.0 * size_or(inputs.sizes, "n", 1);
    case KernelId::scal: return 16.0 * size_or(inputs.sizes, "n", 1);
    case KernelId::spmv: return spmv_traffic(knobs, inputs);
    case KernelId::spmm: return spmm_traffic(knobs, inputs);
    case KernelId::sddmm: return sddmm_traffic(knobs, inputs);
    case KernelId::kmeans: {
      const double points = size_or(inputs.sizes, "points", 1);
      const double dims = size_or(inputs.sizes, "dims", 1);
      const double k = size_or(inputs.sizes, "k", 1);
      return 8.0 * points * dims + 8.0 * k * dims * knobs.threads + 8.0 * points;
    }
  }
  return 0.0;
}

}  // namespace catbench::kernels
