#include "sheetcap/montecarlo.hpp"

#include <cstdlib>
#include <stdexcept>

namespace sheetcap {

namespace {
int g_workers = 0;
}

PathSource PathSource::gaussian(const CovarianceModel& model, const Grid& grid, int d) {
  PathSource s;
  s.spec_ = std::make_shared<const GaussianSampler>(model, grid, d);
  return s;
}

PathSource PathSource::spde(const Coefficients& coeffs, const Grid& grid) {
  coeffs.validate();
  if (grid.params() != 2) throw std::invalid_argument("spde source: grid must have two parameters");
  PathSource s;
  s.spec_ = SpdeSpec{coeffs, grid};
  return s;
}

const Grid& PathSource::grid() const {
  if (const auto* g = std::get_if<std::shared_ptr<const GaussianSampler>>(&spec_)) return (*g)->grid();
  return std::get<SpdeSpec>(spec_).grid;
}

int PathSource::dim() const {
  if (const auto* g = std::get_if<std::shared_ptr<const GaussianSampler>>(&spec_)) return (*g)->dim();
  return std::get<SpdeSpec>(spec_).coeffs.dim;
}

const Coefficients& PathSource::coefficients() const {
  if (!is_spde()) throw std::logic_error("path source is not an SPDE");
  return std::get<SpdeSpec>(spec_).coeffs;
}

std::string PathSource::describe() const {
  if (const auto* g = std::get_if<std::shared_ptr<const GaussianSampler>>(&spec_)) {
    const auto& m = (*g)->model();
    std::string out = to_string(m.family);
    if (m.family == FieldFamily::FBmSheet)
      out += "(H=" + std::to_string(m.hurst) + ",c=" + std::to_string(m.fbm_scale) + ")";
    return out + " d=" + std::to_string((*g)->dim());
  }
  const auto& c = std::get<SpdeSpec>(spec_).coeffs;
  return "spde " + c.description + " d=" + std::to_string(c.dim);
}

const FieldPath& PathSource::Worker::sample(std::uint64_t seed) {
  if (const auto* g = std::get_if<std::shared_ptr<const GaussianSampler>>(&src_->spec_)) {
    (*g)->sample_into(seed, path_);
    return path_;
  }
  const auto& spec = std::get<SpdeSpec>(src_->spec_);
  if (!(path_.grid == spec.grid)) path_.grid = spec.grid;
  path_.d = spec.coeffs.dim;
  path_.increments.resize(spec.grid.cell_count() * static_cast<std::size_t>(spec.coeffs.dim));
  draw_sheet_increments(spec.grid, spec.coeffs.dim, seed, path_.increments);
  solve_in_place(spec.coeffs, path_, ws_);
  return path_;
}

int worker_count() {
  if (g_workers > 0) return g_workers;
  if (const char* env = std::getenv("SHEETCAP_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return omp_get_max_threads();
}

void set_worker_count(int n) { g_workers = n > 0 ? n : 0; }

}  // namespace sheetcap
