#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "catbench/evaluation.hpp"
#include "catbench/parallel.hpp"
#include "catbench/space.hpp"
#include "catbench/study.hpp"

namespace catbench::kernels {

enum class KernelId { gemm, stencil, asum, scal, spmv, spmm, sddmm, kmeans };

std::string_view to_string(KernelId id);
KernelId parse_kernel_id(std::string_view name);  // throws invalid_argument
const std::vector<KernelId> &all_kernels();

struct CsrMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<std::int64_t> offsets;  // rows + 1
  std::vector<std::int32_t> indices;  // strictly increasing within a row
  std::vector<double> values;

  std::int64_t nnz() const { return static_cast<std::int64_t>(values.size()); }
  static CsrMatrix identity(std::int64_t n);
  // Throws malformed_problem when the CSR invariants do not hold.
  void check() const;
};

struct StencilWeights {
  double center = 0, north = 0, south = 0, west = 0, east = 0;
};

// Operands for one kernel. Dimension meaning per kernel:
//   gemm    C(m x n) = A(m x k) * B(k x n)
//   stencil B(m x n) from A(m x n), boundary copied
//   asum    sum |x_i|, x of length n
//   scal    alpha * x, x of length n
//   spmv    y(m) = S(m x n) * x(n)
//   spmm    C(m x n) = S(m x k) * B(k x n)
//   sddmm   out_p = S_p * sum_k C(i,k) D(k,j) over nonzeros p=(i,j) of S(m x n), C(m x k), D(k x n)
//   kmeans  A(m points x n dims), `clusters` centroids
struct KernelProblem {
  KernelId kernel = KernelId::gemm;
  std::int64_t m = 0, n = 0, k = 0;
  std::vector<double> a, b, c, d;
  std::vector<double> x;
  double alpha = 0.0;
  CsrMatrix sparse;
  StencilWeights weights;
  std::int64_t clusters = 0;
  std::uint64_t seed = 0;

  // Throws malformed_problem on dimension mismatches.
  void check() const;
};

// Deterministic in (kernel, sizes, seed); reals uniform in [-1, 1].
KernelProblem generate_problem(KernelId kernel, const std::map<std::string, double> &sizes,
                               std::uint64_t seed);

// Nonzeros per row used by generate_problem for the given density.
std::int64_t nonzeros_per_row(double density, std::int64_t cols);

inline constexpr int kKmeansMaxIterations = 100;
inline constexpr double kKmeansTolerance = 1e-9;

// Untuned evaluation of the kernel's formula. kmeans returns
// [objective, centroids...].
std::vector<double> compute_reference(const KernelProblem &problem);

// Tuning knobs decoded from a configuration by parameter name. Parameters a
// space does not declare keep the untuned value.
struct TuningKnobs {
  std::int64_t tile_i = 0, tile_j = 0, tile_k = 0;  // 0 = untiled
  std::vector<int> loop_order;                       // empty = natural order
  int threads = 1;
  std::int64_t unroll = 1;  // 1 = off; categorical "true" maps to 4
  std::int64_t chunk = 0;   // 0 = one block per worker
  Schedule schedule = Schedule::static_blocked;
  std::vector<int> split;  // spmv row split order; (1,0) interleaves chunks
};

TuningKnobs decode_knobs(const space::SearchSpace &space, const space::Configuration &config);

// Runs the tuned variant once, writing into out (resized as needed).
void run_tuned(const KernelProblem &problem, const TuningKnobs &knobs, std::vector<double> &out);

// Max-norm relative error ||out - ref|| / max(||ref||, tiny).
double relative_error(const std::vector<double> &out, const std::vector<double> &ref);

struct TrafficInputs {
  std::map<std::string, double> sizes;
  std::int64_t llc_bytes = 8 << 20;
};

// Closed-form main-memory traffic estimate in bytes (kmeans: per Lloyd
// iteration). Pure in (kernel, knobs, sizes).
double traffic_model(KernelId kernel, const TuningKnobs &knobs, const TrafficInputs &inputs);

// No tiling, natural loop order, one thread, no unroll, whole-range chunks,
// static schedule.
space::Configuration default_config(const space::SearchSpace &space);
// Default for a bundled kernel study; throws invalid_argument for unknown ids.
space::Configuration list_default_config(std::string_view kernel);

// Hidden-constraint check; returns the infeasibility reason, if any.
std::optional<std::string> hidden_violation(const KernelSettings &settings,
                                            const TuningKnobs &knobs, int available_cores);

// Available cores for hidden-constraint checks: $CATBENCH_CORES overrides the
// study's declaration.
int available_cores(const KernelSettings &settings);

struct ExecuteOptions {
#ifdef NDEBUG
  bool verify_output = false;
#else
  bool verify_output = true;
#endif
  double verify_tolerance = 1e-10;
};

// Owns one study's operands, reference output, and cache-flush buffer.
class KernelExecutor {
 public:
  KernelExecutor(const StudyDefinition &study, ExecuteOptions options = {});

  // Throws InvalidConfigError on domain or known-constraint violations.
  QueryResult execute(const space::Configuration &config, const FidelitySettings &fidelities);

  const KernelProblem &problem() const noexcept { return problem_; }
  // Computed on first use.
  const std::vector<double> &reference();
  const StudyDefinition &study() const noexcept { return study_; }
  // Output of the most recent feasible execution.
  const std::vector<double> &last_output() const noexcept { return output_; }

 private:
  void flush_cache();

  StudyDefinition study_;
  KernelSettings settings_;
  ExecuteOptions options_;
  KernelId kernel_;
  KernelProblem problem_;
  std::vector<double> reference_;
  std::vector<double> output_;
  std::vector<double> flush_buffer_;
};

}  // namespace catbench::kernels
