#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <omp.h>

#include "sheetcap/gaussian_fields.hpp"
#include "sheetcap/kernels.hpp"
#include "sheetcap/rng.hpp"
#include "sheetcap/spde.hpp"

namespace sheetcap {

/// What to simulate: a Gaussian field or the SPDE, on a fixed grid.
class PathSource {
 public:
  static PathSource gaussian(const CovarianceModel& model, const Grid& grid, int d);
  static PathSource spde(const Coefficients& coeffs, const Grid& grid);

  const Grid& grid() const;
  int dim() const;
  bool is_spde() const { return std::holds_alternative<SpdeSpec>(spec_); }
  const Coefficients& coefficients() const;
  std::string describe() const;

  /// Per-worker sampling state. Not thread-safe; make one per thread.
  class Worker {
   public:
    explicit Worker(const PathSource& src) : src_(&src) {}
    /// Path for `seed`; the reference is valid until the next call.
    const FieldPath& sample(std::uint64_t seed);

   private:
    const PathSource* src_;
    FieldPath path_;
    SpdeWorkspace ws_;
  };

 private:
  struct SpdeSpec {
    Coefficients coeffs;
    Grid grid;
  };
  std::variant<std::shared_ptr<const GaussianSampler>, SpdeSpec> spec_;
};

/// Number of OpenMP workers to use: SHEETCAP_THREADS when set, else the
/// OpenMP default.
int worker_count();
void set_worker_count(int n);

/// Evaluates fn(index, path) for paths 0..n-1, path i drawn from
/// derive_seed(seed, i, stream). Results come back in index order whatever
/// the worker count, so any later reduction is deterministic.
template <class Fn>
auto map_paths(const PathSource& src, std::size_t n, std::uint64_t seed, Fn fn, Execution exec = Execution::Parallel,
               std::uint64_t stream = 0) {
  using T = decltype(fn(std::size_t{0}, std::declval<const FieldPath&>()));
  std::vector<T> out(n);
  if (exec == Execution::Serial || n < 2) {
    PathSource::Worker w(src);
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i, w.sample(derive_seed(seed, i, stream)));
    return out;
  }
#pragma omp parallel num_threads(worker_count())
  {
    PathSource::Worker w(src);
#pragma omp for schedule(dynamic, 4)
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i, w.sample(derive_seed(seed, i, stream)));
  }
  return out;
}

}  // namespace sheetcap
