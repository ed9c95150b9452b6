#include <algorithm>
#include <array>
#include <cmath>

#include "catbench/error.hpp"
#include "catbench/kernels.hpp"

namespace catbench::kernels {

namespace {

using Index = std::int64_t;

Index ceil_div(Index a, Index b) { return (a + b - 1) / b; }

// Row ranges for element-wise kernels: chunk == 0 gives one part per thread.
struct Parts {
  Index count;
  Index size;
  Index total;

  Parts(Index total_, Index chunk, int threads) : total(total_) {
    if (chunk > 0) {
      size = chunk;
      count = ceil_div(total, chunk);
    } else {
      count = std::min<Index>(threads, std::max<Index>(total, 1));
      size = 0;
    }
  }
  Index lo(Index part) const { return size > 0 ? part * size : total * part / count; }
  Index hi(Index part) const {
    return size > 0 ? std::min(total, (part + 1) * size) : total * (part + 1) / count;
  }
};

// Schedules parts: static hands out single parts round-robin once chunks are
// explicit, blocked otherwise.
template <class Fn>
void for_parts(const TuningKnobs &t, const Parts &parts, Fn &&fn) {
  Schedule s = t.schedule;
  Index step = 1;
  if (parts.size == 0) s = Schedule::static_blocked;
  else if (s == Schedule::static_blocked) s = Schedule::static_chunked;
  parallel_for(t.threads, parts.count, s, step, [&](Index lo, Index hi) {
    for (Index part = lo; part < hi; ++part) fn(part);
  });
}

// ---- gemm -----------------------------------------------------------------

template <int O0, int O1, int O2, bool U>
void gemm_block(const KernelProblem &p, double *c, const Index *lo, const Index *hi) {
  const double *a = p.a.data();
  const double *b = p.b.data();
  const Index n = p.n, kk = p.k;
  Index idx[3];
  for (idx[O0] = lo[O0]; idx[O0] < hi[O0]; ++idx[O0]) {
    for (idx[O1] = lo[O1]; idx[O1] < hi[O1]; ++idx[O1]) {
      if constexpr (O2 == 2) {
        const Index i = idx[0], j = idx[1];
        const double *arow = a + i * kk;
        double acc = c[i * n + j];
        Index k = lo[2];
        if constexpr (U) {
          for (; k + 4 <= hi[2]; k += 4) {
            acc += arow[k] * b[k * n + j];
            acc += arow[k + 1] * b[(k + 1) * n + j];
            acc += arow[k + 2] * b[(k + 2) * n + j];
            acc += arow[k + 3] * b[(k + 3) * n + j];
          }
        }
        for (; k < hi[2]; ++k) acc += arow[k] * b[k * n + j];
        c[i * n + j] = acc;
      } else if constexpr (O2 == 1) {
        const Index i = idx[0], k = idx[2];
        const double av = a[i * kk + k];
        const double *brow = b + k * n;
        double *crow = c + i * n;
        Index j = lo[1];
        if constexpr (U) {
          for (; j + 4 <= hi[1]; j += 4) {
            crow[j] += av * brow[j];
            crow[j + 1] += av * brow[j + 1];
            crow[j + 2] += av * brow[j + 2];
            crow[j + 3] += av * brow[j + 3];
          }
        }
        for (; j < hi[1]; ++j) crow[j] += av * brow[j];
      } else {
        const Index j = idx[1], k = idx[2];
        const double bv = b[k * n + j];
        Index i = lo[0];
        if constexpr (U) {
          for (; i + 4 <= hi[0]; i += 4) {
            c[i * n + j] += a[i * kk + k] * bv;
            c[(i + 1) * n + j] += a[(i + 1) * kk + k] * bv;
            c[(i + 2) * n + j] += a[(i + 2) * kk + k] * bv;
            c[(i + 3) * n + j] += a[(i + 3) * kk + k] * bv;
          }
        }
        for (; i < hi[0]; ++i) c[i * n + j] += a[i * kk + k] * bv;
      }
    }
  }
}

using GemmBlockFn = void (*)(const KernelProblem &, double *, const Index *, const Index *);

template <bool U>
GemmBlockFn gemm_block_for(const std::array<int, 3> &o) {
  const int code = o[0] * 9 + o[1] * 3 + o[2];
  switch (code) {
    case 0 * 9 + 1 * 3 + 2: return &gemm_block<0, 1, 2, U>;
    case 0 * 9 + 2 * 3 + 1: return &gemm_block<0, 2, 1, U>;
    case 1 * 9 + 0 * 3 + 2: return &gemm_block<1, 0, 2, U>;
    case 1 * 9 + 2 * 3 + 0: return &gemm_block<1, 2, 0, U>;
    case 2 * 9 + 0 * 3 + 1: return &gemm_block<2, 0, 1, U>;
    case 2 * 9 + 1 * 3 + 0: return &gemm_block<2, 1, 0, U>;
  }
  throw Error(ErrorCode::invalid_argument, "gemm loop order must be a permutation of (0,1,2)");
}

std::array<int, 3> order3(const std::vector<int> &order) {
  if (order.size() != 3) return {0, 1, 2};
  return {order[0], order[1], order[2]};
}

void gemm(const KernelProblem &p, const TuningKnobs &t, std::vector<double> &out) {
  out.assign(p.m * p.n, 0.0);
  const std::array<Index, 3> dim = {p.m, p.n, p.k};
  const std::array<Index, 3> tile = {t.tile_i > 0 ? std::min(t.tile_i, p.m) : p.m,
                                     t.tile_j > 0 ? std::min(t.tile_j, p.n) : p.n,
                                     t.tile_k > 0 ? std::min(t.tile_k, p.k) : p.k};
  const std::array<Index, 3> blocks = {ceil_div(dim[0], tile[0]), ceil_div(dim[1], tile[1]),
                                       ceil_div(dim[2], tile[2])};
  const auto o = order3(t.loop_order);
  const GemmBlockFn block = t.unroll > 1 ? gemm_block_for<true>(o) : gemm_block_for<false>(o);
  double *c = out.data();

  auto run = [&](Index b0, Index b1, Index b2) {
    Index lo[3], hi[3];
    const Index bs[3] = {b0, b1, b2};
    for (int q = 0; q < 3; ++q) {
      const int d = o[q];
      lo[d] = bs[q] * tile[d];
      hi[d] = std::min(dim[d], lo[d] + tile[d]);
    }
    block(p, c, lo, hi);
  };

  // Workers split the outermost i/j block loop; a k-outermost order keeps the
  // k blocks sequential and splits the next loop instead.
  if (o[0] != 2) {
    parallel_for(t.threads, blocks[o[0]], Schedule::static_blocked, 0, [&](Index lo, Index hi) {
      for (Index b0 = lo; b0 < hi; ++b0)
        for (Index b1 = 0; b1 < blocks[o[1]]; ++b1)
          for (Index b2 = 0; b2 < blocks[o[2]]; ++b2) run(b0, b1, b2);
    });
  } else {
    for (Index b0 = 0; b0 < blocks[o[0]]; ++b0)
      parallel_for(t.threads, blocks[o[1]], Schedule::static_blocked, 0, [&](Index lo, Index hi) {
        for (Index b1 = lo; b1 < hi; ++b1)
          for (Index b2 = 0; b2 < blocks[o[2]]; ++b2) run(b0, b1, b2);
      });
  }
}

// ---- stencil --------------------------------------------------------------

void stencil(const KernelProblem &p, const TuningKnobs &t, std::vector<double> &out) {
  const Index rows = p.m, cols = p.n;
  out.resize(rows * cols);
  const double *a = p.a.data();
  double *b = out.data();
  std::copy(a, a + cols, b);
  if (rows > 1) std::copy(a + (rows - 1) * cols, a + rows * cols, b + (rows - 1) * cols);
  for (Index i = 1; i + 1 < rows; ++i) {
    b[i * cols] = a[i * cols];
    b[i * cols + cols - 1] = a[i * cols + cols - 1];
  }
  if (rows < 3 || cols < 3) return;

  const auto &w = p.weights;
  const Index ext_i = rows - 2, ext_j = cols - 2;
  const Index ti = t.tile_i > 0 ? std::min(t.tile_i, ext_i) : ext_i;
  const Index tj = t.tile_j > 0 ? std::min(t.tile_j, ext_j) : ext_j;
  const bool i_outer = t.loop_order.size() != 2 || t.loop_order[0] == 0;

  auto point = [&](Index i, Index j) {
    b[i * cols + j] = w.center * a[i * cols + j] + w.north * a[(i - 1) * cols + j] +
                      w.south * a[(i + 1) * cols + j] + w.west * a[i * cols + j - 1] +
                      w.east * a[i * cols + j + 1];
  };
  auto tile_run = [&](Index bi, Index bj) {
    const Index i0 = 1 + bi * ti, i1 = std::min(rows - 1, i0 + ti);
    const Index j0 = 1 + bj * tj, j1 = std::min(cols - 1, j0 + tj);
    if (i_outer) {
      for (Index i = i0; i < i1; ++i)
        for (Index j = j0; j < j1; ++j) point(i, j);
    } else {
      for (Index j = j0; j < j1; ++j)
        for (Index i = i0; i < i1; ++i) point(i, j);
    }
  };
  const Index nbi = ceil_div(ext_i, ti), nbj = ceil_div(ext_j, tj);
  if (i_outer) {
    parallel_for(t.threads, nbi, Schedule::static_blocked, 0, [&](Index lo, Index hi) {
      for (Index bi = lo; bi < hi; ++bi)
        for (Index bj = 0; bj < nbj; ++bj) tile_run(bi, bj);
    });
  } else {
    parallel_for(t.threads, nbj, Schedule::static_blocked, 0, [&](Index lo, Index hi) {
      for (Index bj = lo; bj < hi; ++bj)
        for (Index bi = 0; bi < nbi; ++bi) tile_run(bi, bj);
    });
  }
}

// ---- asum / scal ----------------------------------------------------------

double abs_sum(const double *x, Index lo, Index hi, Index unroll) {
  const Index u = std::clamp<Index>(unroll, 1, 8);
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  Index i = lo;
  for (; i + u <= hi; i += u)
    for (Index q = 0; q < u; ++q) acc[q] += std::abs(x[i + q]);
  for (; i < hi; ++i) acc[0] += std::abs(x[i]);
  double s = acc[0];
  for (Index q = 1; q < u; ++q) s += acc[q];
  return s;
}

void asum(const KernelProblem &p, const TuningKnobs &t, std::vector<double> &out) {
  const Parts parts(p.n, t.chunk, t.threads);
  std::vector<double> partial(parts.count, 0.0);
  for_parts(t, parts, [&](Index part) {
    partial[part] = abs_sum(p.x.data(), parts.lo(part), parts.hi(part), t.unroll);
  });
  double total = 0.0;
  for (double v : partial) total += v;
  out.assign(1, total);
}

void scal(const KernelProblem &p, const TuningKnobs &t, std::vector<double> &out) {
  out.resize(p.n);
  const Parts parts(p.n, t.chunk, t.threads);
  const double alpha = p.alpha;
  const double *x = p.x.data();
  double *y = out.data();
  for_parts(t, parts, [&](Index part) {
    const Index hi = parts.hi(part);
    Index i = parts.lo(part);
    if (t.unroll >= 4) {
      for (; i + 4 <= hi; i += 4) {
        y[i] = alpha * x[i];
        y[i + 1] = alpha * x[i + 1];
        y[i + 2] = alpha * x[i + 2];
        y[i + 3] = alpha * x[i + 3];
      }
    }
    for (; i < hi; ++i) y[i] = alpha * x[i];
  });
}

// ---- sparse ---------------------------------------------------------------

inline double row_dot(const CsrMatrix &s, const double *x, Index row, bool unroll) {
  Index q = s.offsets[row];
  const Index end = s.offsets[row + 1];
  double sum = 0.0;
  if (unroll) {
    for (; q + 4 <= end; q += 4) {
      sum += s.values[q] * x[s.indices[q]];
      sum += s.values[q + 1] * x[s.indices[q + 1]];
      sum += s.values[q + 2] * x[s.indices[q + 2]];
      sum += s.values[q + 3] * x[s.indices[q + 3]];
    }
  }
  for (; q < end; ++q) sum += s.values[q] * x[s.indices[q]];
  return sum;
}

void spmv(const KernelProblem &p, const TuningKnobs &t, std::vector<double> &out) {
  out.resize(p.m);
  const auto &s = p.sparse;
  const bool unroll = t.unroll > 1;
  const bool interleaved = t.split.size() == 2 && t.split[0] == 1 && t.chunk > 0;
  const Parts parts(p.m, t.chunk, t.threads);
  double *y = out.data();
  const double *x = p.x.data();
  if (!interleaved) {
    for_parts(t, parts, [&](Index part) {
      for (Index i = parts.lo(part); i < parts.hi(part); ++i) y[i] = row_dot(s, x, i, unroll);
    });
  } else {
    // Swapped split loops: part q owns rows q, q + count, q + 2 * count, ...
    for_parts(t, parts, [&](Index part) {
      for (Index i = part; i < p.m; i += parts.count) y[i] = row_dot(s, x, i, unroll);
    });
  }
}

void spmm(const KernelProblem &p, const TuningKnobs &t, std::vector<double> &out) {
  const auto &s = p.sparse;
  const Index n = p.n;
  out.assign(p.m * n, 0.0);
  double *c = out.data();
  const double *b = p.b.data();
  const bool unroll = t.unroll > 1;
  const Index tj = t.tile_j > 0 ? std::min(t.tile_j, n) : n;
  const auto o = order3(t.loop_order);
  const bool j_outer = o[0] == 2 && o[1] == 0 && o[2] == 1;
  const bool j_before_p = o[0] == 0 && o[1] == 2 && o[2] == 1;

  auto dot_column = [&](Index i, Index j) {
    Index q = s.offsets[i];
    const Index end = s.offsets[i + 1];
    double acc = 0.0;
    if (unroll) {
      for (; q + 4 <= end; q += 4) {
        acc += s.values[q] * b[s.indices[q] * n + j];
        acc += s.values[q + 1] * b[s.indices[q + 1] * n + j];
        acc += s.values[q + 2] * b[s.indices[q + 2] * n + j];
        acc += s.values[q + 3] * b[s.indices[q + 3] * n + j];
      }
    }
    for (; q < end; ++q) acc += s.values[q] * b[s.indices[q] * n + j];
    c[i * n + j] = acc;
  };

  if (j_outer) {
    const Parts parts(ceil_div(n, tj), t.chunk, t.threads);
    for_parts(t, parts, [&](Index part) {
      for (Index jt = parts.lo(part); jt < parts.hi(part); ++jt)
        for (Index j = jt * tj; j < std::min(n, (jt + 1) * tj); ++j)
          for (Index i = 0; i < p.m; ++i) dot_column(i, j);
    });
    return;
  }
  const Parts parts(p.m, t.chunk, t.threads);
  for_parts(t, parts, [&](Index part) {
    for (Index i = parts.lo(part); i < parts.hi(part); ++i) {
      for (Index j0 = 0; j0 < n; j0 += tj) {
        const Index j1 = std::min(n, j0 + tj);
        if (j_before_p) {
          for (Index j = j0; j < j1; ++j) dot_column(i, j);
          continue;
        }
        double *crow = c + i * n;
        for (Index q = s.offsets[i]; q < s.offsets[i + 1]; ++q) {
          const double v = s.values[q];
          const double *brow = b + static_cast<Index>(s.indices[q]) * n;
          Index j = j0;
          if (unroll) {
            for (; j + 4 <= j1; j += 4) {
              crow[j] += v * brow[j];
              crow[j + 1] += v * brow[j + 1];
              crow[j + 2] += v * brow[j + 2];
              crow[j + 3] += v * brow[j + 3];
            }
          }
          for (; j < j1; ++j) crow[j] += v * brow[j];
        }
      }
    }
  });
}

void sddmm(const KernelProblem &p, const TuningKnobs &t, std::vector<double> &out) {
  const auto &s = p.sparse;
  out.assign(s.nnz(), 0.0);
  const Index kk = p.k, n = p.n;
  const Index tk = t.tile_k > 0 ? std::min(t.tile_k, kk) : kk;
  const bool k_outer = t.loop_order.size() == 2 && t.loop_order[0] == 1;
  const bool unroll = t.unroll > 1;
  const double *cm = p.c.data();
  const double *dm = p.d.data();
  double *acc = out.data();  // accumulate in place, scale at the end of the row

  const Parts parts(p.m, t.chunk, t.threads);
  for_parts(t, parts, [&](Index part) {
    for (Index i = parts.lo(part); i < parts.hi(part); ++i) {
      const Index q0 = s.offsets[i], q1 = s.offsets[i + 1];
      const double *crow = cm + i * kk;
      for (Index k0 = 0; k0 < kk; k0 += tk) {
        const Index k1 = std::min(kk, k0 + tk);
        if (k_outer) {
          for (Index k = k0; k < k1; ++k) {
            const double cv = crow[k];
            const double *drow = dm + k * n;
            for (Index q = q0; q < q1; ++q) acc[q] += cv * drow[s.indices[q]];
          }
        } else {
          for (Index q = q0; q < q1; ++q) {
            const Index j = s.indices[q];
            double sum = acc[q];
            Index k = k0;
            if (unroll) {
              for (; k + 4 <= k1; k += 4) {
                sum += crow[k] * dm[k * n + j];
                sum += crow[k + 1] * dm[(k + 1) * n + j];
                sum += crow[k + 2] * dm[(k + 2) * n + j];
                sum += crow[k + 3] * dm[(k + 3) * n + j];
              }
            }
            for (; k < k1; ++k) sum += crow[k] * dm[k * n + j];
            acc[q] = sum;
          }
        }
      }
      for (Index q = q0; q < q1; ++q) acc[q] = s.values[q] * acc[q];
    }
  });
}

// ---- kmeans ---------------------------------------------------------------

void kmeans(const KernelProblem &p, const TuningKnobs &t, std::vector<double> &out) {
  const Index dims = p.n, kc = p.clusters;
  const Index u = std::clamp<Index>(t.unroll, 1, 4);
  std::vector<double> centroids(p.a.begin(), p.a.begin() + kc * dims);
  std::vector<Index> assign(p.m, 0);
  std::vector<double> best_dist(p.m, 0.0);

  auto sq_dist = [&](Index point, Index cluster) {
    const double *x = p.a.data() + point * dims;
    const double *m = centroids.data() + cluster * dims;
    double acc[4] = {0, 0, 0, 0};
    Index d = 0;
    for (; d + u <= dims; d += u)
      for (Index q = 0; q < u; ++q) {
        const double diff = x[d + q] - m[d + q];
        acc[q] += diff * diff;
      }
    for (; d < dims; ++d) {
      const double diff = x[d] - m[d];
      acc[0] += diff * diff;
    }
    double s = acc[0];
    for (Index q = 1; q < u; ++q) s += acc[q];
    return s;
  };
  const Parts parts(p.m, t.chunk, t.threads);
  auto assign_all = [&] {
    for_parts(t, parts, [&](Index part) {
      for (Index i = parts.lo(part); i < parts.hi(part); ++i) {
        Index best = 0;
        double bd = sq_dist(i, 0);
        for (Index c = 1; c < kc; ++c) {
          const double dc = sq_dist(i, c);
          if (dc < bd) bd = dc, best = c;
        }
        assign[i] = best;
        best_dist[i] = bd;
      }
    });
  };

  std::vector<double> sums(kc * dims);
  std::vector<Index> counts(kc);
  for (int iter = 0; iter < kKmeansMaxIterations; ++iter) {
    assign_all();
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (Index i = 0; i < p.m; ++i) {
      ++counts[assign[i]];
      for (Index d = 0; d < dims; ++d) sums[assign[i] * dims + d] += p.a[i * dims + d];
    }
    double movement = 0.0;
    for (Index c = 0; c < kc; ++c) {
      if (counts[c] == 0) continue;
      double moved = 0.0;
      for (Index d = 0; d < dims; ++d) {
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
  for (Index i = 0; i < p.m; ++i) objective += best_dist[i];
  out.clear();
  out.push_back(objective);
  out.insert(out.end(), centroids.begin(), centroids.end());
}

}  // namespace

TuningKnobs decode_knobs(const space::SearchSpace &space, const space::Configuration &config) {
  TuningKnobs t;
  const auto &params = space.parameters();
  std::string schedule = "static";
  for (std::size_t i = 0; i < params.size() && i < config.values.size(); ++i) {
    const auto &name = params[i].name;
    const auto &v = config.values[i];
    auto as_int = [&]() -> std::int64_t {
      if (auto *x = std::get_if<std::int64_t>(&v)) return *x;
      if (auto *s = std::get_if<std::string>(&v)) return *s == "true" ? 4 : 1;
      return 0;
    };
    if (name == "tile_i") t.tile_i = as_int();
    else if (name == "tile_j") t.tile_j = as_int();
    else if (name == "tile_k") t.tile_k = as_int();
    else if (name == "threads") t.threads = static_cast<int>(std::max<std::int64_t>(1, as_int()));
    else if (name == "unroll") t.unroll = std::max<std::int64_t>(1, as_int());
    else if (name == "chunk") t.chunk = as_int();
    else if (name == "loop_order") t.loop_order = std::get<space::Permutation>(v);
    else if (name == "split") t.split = std::get<space::Permutation>(v);
    else if (name == "schedule") schedule = std::get<std::string>(v);
  }
  if (schedule == "dynamic") t.schedule = Schedule::dynamic;
  else if (schedule == "guided") t.schedule = Schedule::guided;
  else t.schedule = Schedule::static_blocked;
  return t;
}

void run_tuned(const KernelProblem &problem, const TuningKnobs &knobs, std::vector<double> &out) {
  switch (problem.kernel) {
    case KernelId::gemm: gemm(problem, knobs, out); break;
    case KernelId::stencil: stencil(problem, knobs, out); break;
    case KernelId::asum: asum(problem, knobs, out); break;
    case KernelId::scal: scal(problem, knobs, out); break;
    case KernelId::spmv: spmv(problem, knobs, out); break;
    case KernelId::spmm: spmm(problem, knobs, out); break;
    case KernelId::sddmm: sddmm(problem, knobs, out); break;
    case KernelId::kmeans: kmeans(problem, knobs, out); break;
  }
}

}  // namespace catbench::kernels
