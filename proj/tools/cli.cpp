#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <omp.h>

#include "sheetcap/capacity.hpp"
#include "sheetcap/dimension.hpp"
#include "sheetcap/gaussian_fields.hpp"
#include "sheetcap/hitting.hpp"
#include "sheetcap/montecarlo.hpp"
#include "sheetcap/spde.hpp"
#include "sheetcap/verify.hpp"

#ifndef SHEETCAP_VERSION
#define SHEETCAP_VERSION "0.0.0"
#endif

namespace sheetcap::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// CSV tables

std::string cell(const std::string& s) { return s; }
std::string cell(bool b) { return b ? "true" : "false"; }
std::string cell(double v) { return fmt::format("{}", v); }
template <class T>
  requires std::is_integral_v<T>
std::string cell(T v) {
  return fmt::format("{}", v);
}

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  template <class... Ts>
  void row(const Ts&... values) {
    rows.push_back({cell(values)...});
  }
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_table(const fs::path& dir, const Table& t) {
  std::ofstream f(dir / (t.name + ".csv"), std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + (dir / (t.name + ".csv")).string());
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) f << (i ? "," : "") << csv_field(fields[i]);
    f << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw std::logic_error("table " + t.name + ": ragged row");
    line(r);
  }
  if (!f) throw std::runtime_error("write failed for " + t.name + ".csv");
}

std::string joined(const std::vector<double>& v, const char* sep = ";") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + fmt::format("{}", v[i]);
  return out;
}

std::vector<std::string> numbered(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

template <class T>
std::vector<T> concat(std::vector<T> a, const std::vector<T>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<std::string> cells(std::span<const double> v) {
  std::vector<std::string> out;
  for (double x : v) out.push_back(cell(x));
  return out;
}

// ---------------------------------------------------------------------------
// Parsing helpers

std::vector<double> parse_numbers(const std::string& text, char sep = ',') {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("not a number list: '" + text + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty number list");
  return out;
}

/// "lo:hi:k" gives k log-spaced values; otherwise a comma list.
std::vector<double> parse_values(const std::string& text) {
  if (std::count(text.begin(), text.end(), ':') == 2) {
    const auto a = text.find(':'), b = text.rfind(':');
    const auto lo = parse_numbers(text.substr(0, a)), hi = parse_numbers(text.substr(a + 1, b - a - 1));
    const auto k = parse_numbers(text.substr(b + 1));
    if (lo.size() != 1 || hi.size() != 1 || k.size() != 1 || k[0] < 2 || k[0] != std::floor(k[0]) ||
        !(lo[0] > 0.0) || !(hi[0] > lo[0]))
      throw ConfigError("range '" + text + "' must read lo:hi:k with 0 < lo < hi and integer k >= 2");
    return log_space(lo[0], hi[0], static_cast<std::size_t>(k[0]));
  }
  return parse_numbers(text);
}

std::vector<int> to_ints(const std::vector<double>& v, const char* what) {
  std::vector<int> out;
  for (double x : v) {
    if (x != std::floor(x) || x < 1) throw ConfigError(std::string(what) + ": expected positive integers");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

BandwidthPolicy bandwidth_policy(const std::string& text) {
  try {
    return parse_bandwidth_policy(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

MarginPolicy margin_policy(const std::string& text) {
  try {
    return parse_margin_policy(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

CompactSet compact_set(const std::string& text, int d) {
  try {
    CompactSet s = parse_set(text);
    if (s.dim() != d) throw ConfigError(fmt::format("set '{}' lives in R^{} but the field is R^{}-valued", text, s.dim(), d));
    return s;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Model and grid options

struct ModelOpts {
  std::string model = "sheet";
  int d = 2;
  int n_params = 2;
  double hurst = 0.5;
  double fbm_scale = 1.0;
  std::string coeffs = "diagonal";
  double rho = 1.0;
  double eps = -1.0;
  std::vector<double> drift;

  bool spde() const { return model == "spde"; }
  int params() const { return spde() ? 2 : n_params; }
  double alpha() const { return model == "fbm" ? hurst : 0.5; }
  /// d - N / alpha
  double codimension() const { return d - params() / alpha(); }
  bool exactly_gaussian() const { return !spde() || (coeffs == "diagonal" && drift.empty()); }
  double amplitude() const { return spde() ? rho : 1.0; }
};

struct GridOpts {
  std::vector<double> window{1.0, 2.0};
  int lead = 4;
  int cells = 64;

  Window win() const { return {window[0], window[1]}; }
};

void add_model_options(CLI::App* sub, ModelOpts& m, bool gaussian_only = false, bool spde_only = false) {
  if (!spde_only) {
    auto* o = sub->add_option("--model", m.model, "Field: sheet, ou, fbm or spde")->capture_default_str();
    o->check(gaussian_only ? CLI::IsMember({"sheet", "ou", "fbm"}) : CLI::IsMember({"sheet", "ou", "fbm", "spde"}));
    sub->add_option("--n-params", m.n_params, "Parameter dimension N of a Gaussian field")
        ->capture_default_str()
        ->check(CLI::Range(1, 4));
    sub->add_option("--hurst", m.hurst, "Hurst index of the fractional sheet")->capture_default_str();
    sub->add_option("--fbm-scale", m.fbm_scale, "Constant c of the fractional sheet covariance")->capture_default_str();
  } else {
    m.model = "spde";
  }
  sub->add_option("--d", m.d, "State dimension")->capture_default_str()->check(CLI::Range(1, 64));
  if (!gaussian_only) {
    sub->add_option("--coeffs", m.coeffs, "SPDE diffusion: diagonal or perturbed")
        ->capture_default_str()
        ->check(CLI::IsMember({"diagonal", "perturbed"}));
    sub->add_option("--rho", m.rho, "SPDE diffusion scale")->capture_default_str();
    sub->add_option("--eps", m.eps, "Perturbation size (negative: rho / 2d)")->capture_default_str();
    sub->add_option("--drift", m.drift, "Constant SPDE drift vector")->delimiter(',');
  }
}

void add_grid_options(CLI::App* sub, GridOpts& g, int default_cells) {
  g.cells = default_cells;
  sub->add_option("--window", g.window, "Parameter window a,b")->delimiter(',')->expected(2)->capture_default_str();
  sub->add_option("--lead", g.lead, "Grid cells on [0, a] per axis")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--cells", g.cells, "Grid cells on [a, b] per axis")->capture_default_str()->check(CLI::PositiveNumber);
}

Coefficients coefficients(const ModelOpts& m) {
  try {
    if (!(m.rho > 0.0)) throw ConfigError("--rho must be > 0");
    Coefficients c = m.coeffs == "diagonal" ? constant_diagonal(m.d, m.rho) : perturbed_identity(m.d, m.rho, m.eps);
    if (!m.drift.empty()) {
      if (m.drift.size() != static_cast<std::size_t>(m.d)) throw ConfigError("--drift needs d components");
      c = with_constant_drift(std::move(c), m.drift);
    }
    c.validate();
    return c;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Grid make_grid(const GridOpts& g, int n_params) {
  if (g.window.size() != 2 || !(g.window[0] > 0.0) || !(g.window[1] > g.window[0]))
    throw ConfigError("--window must be a,b with 0 < a < b");
  return Grid::windowed(n_params, g.window[0], g.window[1], g.lead, g.cells);
}

PathSource make_source(const ModelOpts& m, const Grid& grid) {
  try {
    if (m.spde()) return PathSource::spde(coefficients(m), grid);
    CovarianceModel cm;
    cm.family = parse_family(m.model);
    cm.hurst = m.hurst;
    cm.fbm_scale = m.fbm_scale;
    cm.validate();
    return PathSource::gaussian(cm, grid, m.d);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

/// Variance of one coordinate at parameter t, when the law is Gaussian and known.
std::function<double(std::span<const double>)> variance_fn(const ModelOpts& m) {
  if (!m.exactly_gaussian()) return {};
  if (m.spde()) {
    const double r2 = m.rho * m.rho;
    return [r2](std::span<const double> t) {
      double v = r2;
      for (double x : t) v *= x;
      return v;
    };
  }
  CovarianceModel cm;
  cm.family = parse_family(m.model);
  cm.hurst = m.hurst;
  cm.fbm_scale = m.fbm_scale;
  return [cm](std::span<const double> t) { return covariance(cm, t, t); };
}

std::vector<std::size_t> node_of(const Grid& grid, const std::vector<double>& p, const char* what) {
  if (p.size() != static_cast<std::size_t>(grid.params()))
    throw ConfigError(fmt::format("{} needs {} coordinates", what, grid.params()));
  std::vector<std::size_t> out;
  for (int k = 0; k < grid.params(); ++k) {
    const long i = grid.find_node(k, p[static_cast<std::size_t>(k)]);
    if (i < 0) throw ConfigError(fmt::format("{} = ({}) is not a grid node", what, joined(p, ",")));
    out.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

std::vector<double> origin_or(const std::vector<double>& v, int d, const char* what) {
  if (v.empty()) return std::vector<double>(static_cast<std::size_t>(d), 0.0);
  if (v.size() != static_cast<std::size_t>(d)) throw ConfigError(fmt::format("{} needs {} coordinates", what, d));
  return v;
}

// ---------------------------------------------------------------------------
// Subcommands

struct Outcome {
  std::vector<Table> tables;
  std::optional<bool> pass;  ///< empty for commands that verify nothing
  json summary = json::object();
};

struct Global {
  std::uint64_t seed = 1;
  std::string out = "out";
  bool strict = false;
  int threads = 0;
};

using Handler = std::function<Outcome()>;

struct Command {
  CLI::App* app;
  Handler run;
};

Table density_table(const std::string& name, const std::vector<std::string>& lead_header, int d) {
  Table t{name, concat(lead_header, concat(numbered("x", static_cast<std::size_t>(d)),
                                           {"density", "budget", "lower_envelope", "upper_envelope", "reference"})),
          {}};
  return t;
}

void add_density_rows(Table& t, const std::vector<std::string>& lead, const DensityFitReport& r) {
  const auto ud = static_cast<std::size_t>(r.d);
  for (std::size_t i = 0; i < r.size(); ++i) {
    auto row = concat(lead, cells({r.points.data() + i * ud, ud}));
    row.push_back(cell(r.density[i]));
    row.push_back(cell(r.budget[i]));
    row.push_back(cell(r.lower_envelope(i)));
    row.push_back(cell(r.upper_envelope(i)));
    row.push_back(r.reference.empty() ? "" : cell(r.reference[i]));
    t.rows.push_back(std::move(row));
  }
}

const std::vector<std::string> kFitHeader{"shape_scale", "reach",     "n_samples",  "bandwidth_policy",
                                          "bandwidth",   "c_low",     "c_up",       "pass_lower",
                                          "pass_upper",  "pass",      "sup_rel_error"};

std::vector<std::string> fit_cells(const DensityFitReport& r) {
  return {cell(r.shape_scale), cell(r.reach),      cell(r.n_samples),  r.bandwidth_policy,
          joined(r.bandwidth), cell(r.c_low),      cell(r.c_up),       cell(r.pass_lower),
          cell(r.pass_upper),  cell(r.pass),       r.reference.empty() ? "" : cell(r.sup_rel_error)};
}

Command simulate_cmd(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("simulate", "Sample paths of a field or of the SPDE on a grid");
  auto m = std::make_shared<ModelOpts>();
  auto gr = std::make_shared<GridOpts>();
  auto n = std::make_shared<std::size_t>(1);
  add_model_options(sub, *m);
  add_grid_options(sub, *gr, 16);
  sub->add_option("--n", *n, "Number of paths")->capture_default_str()->check(CLI::PositiveNumber);
  return {sub, [=, &g]() {
            const Grid grid = make_grid(*gr, m->params());
            const PathSource src = make_source(*m, grid);
            const auto values =
                map_paths(src, *n, g.seed, [](std::size_t, const FieldPath& p) { return p.values; });
            Table t{"simulate",
                    concat(concat({"path"}, numbered("t", static_cast<std::size_t>(grid.params()))),
                           numbered("x", static_cast<std::size_t>(m->d))),
                    {}};
            const auto d = static_cast<std::size_t>(m->d);
            for (std::size_t i = 0; i < *n; ++i)
              for (std::size_t node = 0; node < grid.node_count(); ++node) {
                auto row = concat({cell(i)}, cells(grid.node_point(node)));
                t.rows.push_back(concat(row, cells({values[i].data() + node * d, d})));
              }
            Outcome o;
            o.tables.push_back(std::move(t));
            o.summary = {{"source", src.describe()}, {"grid", describe_grid(grid)}, {"paths", *n}};
            return o;
          }};
}

Command capacity_cmd(CLI::App& app, const Global&) {
  auto* sub = app.add_subcommand("capacity", "Riesz capacity of a compact set by energy minimization");
  struct Opts {
    std::string set;
    double beta = 1.0;
    double log_scale = 1.0;
    std::string resolutions = "8,16,32";
    double tol = 1e-6;
    std::size_t max_iter = 5'000'000;
    bool write_measure = false;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--set", o->set, "Compact set, e.g. ball:0,0,0:1")->required();
  sub->add_option("--beta", o->beta, "Kernel exponent")->capture_default_str();
  sub->add_option("--log-scale", o->log_scale, "M of the logarithmic kernel")->capture_default_str();
  sub->add_option("--resolutions", o->resolutions, "Points per axis, comma separated")->capture_default_str();
  sub->add_option("--tol", o->tol, "Relative duality gap target")->capture_default_str();
  sub->add_option("--max-iter", o->max_iter, "Iteration cap")->capture_default_str();
  sub->add_flag("--write-measure", o->write_measure, "Also write the equilibrium measure");
  return {sub, [=]() {
            CompactSet set = [&] {
              try {
                return parse_set(o->set);
              } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
              }
            }();
            const auto res = to_ints(parse_numbers(o->resolutions), "--resolutions");
            SolverOptions so;
            so.tol = o->tol;
            so.max_iter = o->max_iter;
            CapacityResult r;
            try {
              r = capacity_of(set, RieszKernel(o->beta, set.dim(), o->log_scale), res, so);
            } catch (const std::invalid_argument& e) {
              throw ConfigError(e.what());
            }
            Outcome out;
            Table t{"capacity",
                    {"set", "beta", "resolution", "atoms", "cell_size", "value", "energy", "duality_gap", "iterations",
                     "converged"},
                    {}};
            bool ok = true;
            if (r.sequence.empty()) {
              t.row(o->set, o->beta, 0, r.equilibrium.size(), r.equilibrium.cell_size, r.value, r.energy, r.duality_gap,
                    r.iterations, r.converged);
            }
            for (const auto& row : r.sequence) {
              t.row(o->set, o->beta, row.resolution, row.atoms, row.cell_size, row.value, row.energy, row.duality_gap,
                    row.iterations, row.converged);
              ok = ok && row.converged && row.duality_gap <= o->tol * row.energy * (1.0 + 1e-12);
            }
            out.tables.push_back(std::move(t));
            if (o->write_measure) {
              Table m{"equilibrium", concat(numbered("x", static_cast<std::size_t>(set.dim())), {"weight"}), {}};
              for (std::size_t i = 0; i < r.equilibrium.size(); ++i)
                m.rows.push_back(concat(cells(r.equilibrium.point(i)), {cell(r.equilibrium.weights[i])}));
              out.tables.push_back(std::move(m));
            }
            out.pass = ok;
            out.summary = {{"capacity", r.value}, {"energy", r.energy}, {"resolution", r.resolution}};
            return out;
          }};
}

Command hitprob_cmd(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("hitprob", "Monte Carlo probability that the path hits each set over the window");
  auto m = std::make_shared<ModelOpts>();
  auto gr = std::make_shared<GridOpts>();
  struct Opts {
    std::vector<std::string> sets;
    std::size_t n = 10000;
    std::string margin = "continuity";
  };
  auto o = std::make_shared<Opts>();
  add_model_options(sub, *m);
  add_grid_options(sub, *gr, 128);
  sub->add_option("--set", o->sets, "Target set (repeatable)")->required();
  sub->add_option("--n", o->n, "Paths")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--margin", o->margin, "Margin policy")->capture_default_str();
  return {sub, [=, &g]() {
            const Grid grid = make_grid(*gr, m->params());
            const PathSource src = make_source(*m, grid);
            const MarginPolicy policy = margin_policy(o->margin);
            std::vector<CompactSet> sets;
            for (const auto& s : o->sets) sets.push_back(compact_set(s, m->d));
            const double margin = policy.margin(grid, gr->win(), noise_scale(src));
            const auto est = estimate_hit_probs(src, sets, std::vector<double>(sets.size(), margin), gr->win(), o->n,
                                                g.seed);
            Table t{"hitprob", {"set", "p_hat", "n_hits", "n_paths", "ci_low", "ci_high", "margin", "grid"}, {}};
            for (std::size_t i = 0; i < sets.size(); ++i)
              t.row(o->sets[i], est[i].p_hat, est[i].n_hits, est[i].n_paths, est[i].ci_low, est[i].ci_high,
                    est[i].margin, est[i].grid_description);
            Outcome out;
            out.tables.push_back(std::move(t));
            out.summary = {{"source", src.describe()}, {"margin_policy", policy.describe()}, {"margin", margin}};
            return out;
          }};
}

Command scaling_cmd(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("scaling", "Log-log slope of hit probability against ball radius");
  auto m = std::make_shared<ModelOpts>();
  auto gr = std::make_shared<GridOpts>();
  struct Opts {
    std::vector<double> center;
    std::string radii = "0.05:0.4:6";
    std::size_t n = 20000;
    std::string margin = "continuity";
    double expected = std::numeric_limits<double>::quiet_NaN();
    double slope_tol = 0.3;
  };
  auto o = std::make_shared<Opts>();
  add_model_options(sub, *m);
  add_grid_options(sub, *gr, 128);
  sub->add_option("--center", o->center, "Ball center (default origin)")->delimiter(',');
  sub->add_option("--radii", o->radii, "lo:hi:k log-spaced, or a comma list")->capture_default_str();
  sub->add_option("--n", o->n, "Paths")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--margin", o->margin, "Margin policy")->capture_default_str();
  sub->add_option("--expected", o->expected, "Expected slope (default max(d - N/alpha, 0))");
  sub->add_option("--slope-tol", o->slope_tol, "Allowed |slope - expected|")->capture_default_str();
  return {sub, [=, &g]() {
            const Grid grid = make_grid(*gr, m->params());
            const PathSource src = make_source(*m, grid);
            const MarginPolicy policy = margin_policy(o->margin);
            const auto center = origin_or(o->center, m->d, "--center");
            const auto radii = parse_values(o->radii);
            for (double r : radii)
              if (!(r > 0.0)) throw ConfigError("--radii must be > 0");
            const double expected = std::isnan(o->expected) ? std::max(m->codimension(), 0.0) : o->expected;
            const ScalingReport rep = scaling_experiment(src, center, radii, gr->win(), o->n, policy, g.seed);
            Table t{"scaling", {"radius", "p_hat", "n_hits", "n_paths", "ci_low", "ci_high", "retained", "margin"}, {}};
            for (std::size_t i = 0; i < radii.size(); ++i) {
              const auto& e = rep.estimates[i];
              t.row(radii[i], e.p_hat, e.n_hits, e.n_paths, e.ci_low, e.ci_high, static_cast<bool>(rep.retained[i]),
                    e.margin);
            }
            const bool pass = rep.sufficient && std::abs(rep.slope - expected) <= o->slope_tol;
            Table f{"scaling_fit",
                    {"source", "d", "slope", "slope_stderr", "intercept", "expected", "slope_tol", "sufficient",
                     "margin_policy", "margin", "pass"},
                    {}};
            f.row(src.describe(), m->d, rep.slope, rep.slope_stderr, rep.intercept, expected, o->slope_tol,
                  rep.sufficient, rep.margin_policy, rep.margin, pass);
            Outcome out;
            out.tables.push_back(std::move(t));
            out.tables.push_back(std::move(f));
            out.pass = pass;
            out.summary = {{"slope", rep.slope}, {"expected", expected}};
            return out;
          }};
}

Command h1_cmd(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("verify-h1", "Occupation density at a point against its exact value");
  auto m = std::make_shared<ModelOpts>();
  auto gr = std::make_shared<GridOpts>();
  struct Opts {
    std::vector<double> x;
    double h = 0.2;
    std::size_t n = 10000;
    double tol = 0.15;
  };
  auto o = std::make_shared<Opts>();
  add_model_options(sub, *m);
  add_grid_options(sub, *gr, 64);
  sub->add_option("--x", o->x, "Target point (default origin)")->delimiter(',');
  sub->add_option("--h", o->h, "Neighbourhood radius")->capture_default_str();
  sub->add_option("--n", o->n, "Paths")->capture_default_str()->check(CLI::Range(std::size_t{2}, std::size_t{1} << 40));
  sub->add_option("--tol", o->tol, "Allowed relative error")->capture_default_str();
  return {sub, [=, &g]() {
            const Grid grid = make_grid(*gr, m->params());
            const PathSource src = make_source(*m, grid);
            const auto x = origin_or(o->x, m->d, "--x");
            if (!(o->h > 0.0)) throw ConfigError("--h must be > 0");
            const auto var = variance_fn(*m);
            const double ref = var ? expected_occupation(var, x, gr->win(), m->params())
                                   : std::numeric_limits<double>::quiet_NaN();
            const OccupationEstimate e = occupation_density(src, x, o->h, gr->win(), o->n, g.seed);
            const double rel = std::abs(e.value / ref - 1.0);
            const bool pass = var ? rel <= o->tol : true;
            Table t{"h1", {"x", "h", "value", "stderr", "ci_low", "ci_high", "n_paths", "reference", "rel_error", "pass"},
                    {}};
            t.row(joined(x), o->h, e.value, e.stderr_, e.ci.low, e.ci.high, e.n_paths, var ? cell(ref) : "",
                  var ? cell(rel) : "", pass);
            Outcome out;
            out.tables.push_back(std::move(t));
            out.pass = pass;
            out.summary = {{"value", e.value}, {"reference", var ? json(ref) : json(nullptr)}};
            return out;
          }};
}

Command h2_cmd(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("verify-h2", "Joint occupation of two neighbourhoods against the kernel");
  auto m = std::make_shared<ModelOpts>();
  auto gr = std::make_shared<GridOpts>();
  struct Opts {
    std::vector<std::string> pairs;
    double h = 0.2;
    std::size_t n = 10000;
    double beta = std::numeric_limits<double>::quiet_NaN();
    std::size_t min_joint_hits = 10;
    double ceiling = 20.0;
  };
  auto o = std::make_shared<Opts>();
  add_model_options(sub, *m);
  add_grid_options(sub, *gr, 64);
  sub->add_option("--pair", o->pairs, "Point pair x1,..,xd;y1,..,yd (repeatable)")->required();
  sub->add_option("--h", o->h, "Neighbourhood radius")->capture_default_str();
  sub->add_option("--n", o->n, "Paths")->capture_default_str();
  sub->add_option("--beta", o->beta, "Kernel exponent (default d - N/alpha)");
  sub->add_option("--min-joint-hits", o->min_joint_hits, "Rows with fewer joint visits are flagged")
      ->capture_default_str();
  sub->add_option("--ceiling", o->ceiling, "Allowed max/min ratio over usable rows")->capture_default_str();
  return {sub, [=, &g]() {
            const Grid grid = make_grid(*gr, m->params());
            const PathSource src = make_source(*m, grid);
            std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
            for (const auto& p : o->pairs) {
              const auto semi = p.find(';');
              if (semi == std::string::npos) throw ConfigError("--pair must read x1,..,xd;y1,..,yd");
              auto x = parse_numbers(p.substr(0, semi)), y = parse_numbers(p.substr(semi + 1));
              if (x.size() != static_cast<std::size_t>(m->d) || y.size() != x.size())
                throw ConfigError("--pair points need d coordinates each");
              if (x == y) throw ConfigError("--pair points must differ");
              pairs.emplace_back(std::move(x), std::move(y));
            }
            if (!(o->h > 0.0)) throw ConfigError("--h must be > 0");
            if (o->n < 2) throw ConfigError("--n must be >= 2");
            const double beta = std::isnan(o->beta) ? m->codimension() : o->beta;
            const RieszKernel k(beta, m->d);
            const auto rep = pair_occupation_ratio(src, pairs, o->h, gr->win(), o->n, k, g.seed, o->min_joint_hits);
            Table t{"h2",
                    {"x", "y", "separation", "kernel_value", "pair_occupation", "stderr", "ratio", "joint_hits",
                     "flagged"},
                    {}};
            for (const auto& r : rep.rows)
              t.row(joined(r.x), joined(r.y), r.separation, r.kernel_value, r.pair_occupation, r.stderr_, r.ratio,
                    r.joint_hits, r.flagged);
            const bool pass = rep.usable > 0 && rep.stability <= o->ceiling;
            Table s{"h2_summary", {"beta", "h", "n_paths", "usable", "c2_hat", "stability", "ceiling", "pass"}, {}};
            s.row(beta, o->h, o->n, rep.usable, rep.c2_hat, rep.stability, o->ceiling, pass);
            Outcome out;
            out.tables.push_back(std::move(t));
            out.tables.push_back(std::move(s));
            out.pass = pass;
            out.summary = {{"c2_hat", rep.c2_hat}, {"usable", rep.usable}};
            return out;
          }};
}

Command density_cmd(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("verify-density", "Gaussian-shape bounds for the density of X_s");
  auto m = std::make_shared<ModelOpts>();
  auto gr = std::make_shared<GridOpts>();
  struct Opts {
    std::vector<double> s{1.5, 1.5};
    std::size_t n = 100000;
    std::string bandwidth = "scott:1.3";
    double tol = 0.15;
  };
  auto o = std::make_shared<Opts>();
  add_model_options(sub, *m);
  add_grid_options(sub, *gr, 4);
  sub->add_option("--s", o->s, "Parameter point (a grid node)")->delimiter(',')->capture_default_str();
  sub->add_option("--n", o->n, "Samples")->capture_default_str();
  sub->add_option("--bandwidth", o->bandwidth, "Bandwidth rule[:factor]")->capture_default_str();
  sub->add_option("--tol", o->tol, "Allowed sup relative error against the exact density")->capture_default_str();
  return {sub, [=, &g]() {
            const Grid grid = make_grid(*gr, m->params());
            const PathSource src = make_source(*m, grid);
            const auto node = node_of(grid, o->s, "--s");
            const BandwidthPolicy policy = bandwidth_policy(o->bandwidth);
            if (o->n < 2 * policy.min_samples) throw ConfigError("--n is too small for the bandwidth policy");
            DensityFn ref;
            if (const auto var = variance_fn(*m)) {
              const double v = var(o->s);
              ref = [v](std::span<const double> x) { return normal_density(x, v); };
            }
            const auto rep = marginal_density_check(src, node, o->n, policy, g.seed, ref);
            Table t = density_table("density", {}, m->d);
            add_density_rows(t, {}, rep);
            Table s{"density_summary", concat({"s", "d"}, kFitHeader), {}};
            s.rows.push_back(concat({joined(o->s), cell(m->d)}, fit_cells(rep)));
            const bool pass = rep.pass && (!ref || rep.sup_rel_error <= o->tol);
            Outcome out;
            out.tables.push_back(std::move(t));
            out.tables.push_back(std::move(s));
            out.pass = pass;
            out.summary = {{"c_low", rep.c_low}, {"c_up", rep.c_up}};
            if (ref) out.summary["sup_rel_error"] = rep.sup_rel_error;
            return out;
          }};
}

Command conditional_cmd(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("verify-conditional", "Bounds for the SPDE increment density given the past");
  auto m = std::make_shared<ModelOpts>();
  auto gr = std::make_shared<GridOpts>();
  struct Opts {
    std::vector<double> s{1.0, 1.0};
    std::vector<std::string> t;
    std::size_t pasts = 5;
    std::size_t n = 20000;
    std::string bandwidth = "scott:1.0";
    double tol = 0.15;
    double rate_tol = 0.2;
  };
  auto o = std::make_shared<Opts>();
  add_model_options(sub, *m, false, true);
  add_grid_options(sub, *gr, 8);
  sub->add_option("--s", o->s, "Conditioning point (a grid node)")->delimiter(',')->capture_default_str();
  sub->add_option("--t", o->t, "Target point t1,t2 (repeatable)")->required();
  sub->add_option("--pasts", o->pasts, "Frozen pasts")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--n", o->n, "Continuations per past")->capture_default_str();
  sub->add_option("--bandwidth", o->bandwidth, "Bandwidth rule[:factor]")->capture_default_str();
  sub->add_option("--tol", o->tol, "Allowed sup relative error against the exact density")->capture_default_str();
  sub->add_option("--rate-tol", o->rate_tol, "Allowed relative error of the envelope rate")->capture_default_str();
  return {sub, [=, &g]() {
            const Grid grid = make_grid(*gr, 2);
            const Coefficients coeffs = coefficients(*m);
            const auto s_node = node_of(grid, o->s, "--s");
            const BandwidthPolicy policy = bandwidth_policy(o->bandwidth);
            if (o->n < 2 * policy.min_samples) throw ConfigError("--n is too small for the bandwidth policy");
            std::vector<std::vector<double>> ts;
            std::vector<std::vector<std::size_t>> t_nodes;
            for (const auto& text : o->t) {
              ts.push_back(parse_numbers(text));
              t_nodes.push_back(node_of(grid, ts.back(), "--t"));
              if (ts.back()[0] < o->s[0] || ts.back()[1] < o->s[1] || ts.back() == o->s)
                throw ConfigError("--t must dominate --s componentwise and differ from it");
            }
            Table t = density_table("conditional", {"t", "past"}, m->d);
            Table s{"conditional_summary", concat({"t", "separation", "past", "d"}, kFitHeader), {}};
            std::vector<double> seps, c_up;
            bool pass = true;
            for (std::size_t q = 0; q < ts.size(); ++q) {
              DensityFn ref;
              if (m->exactly_gaussian()) {
                const double v = m->rho * m->rho * (ts[q][0] * ts[q][1] - o->s[0] * o->s[1]);
                ref = [v](std::span<const double> x) { return normal_density(x, v); };
              }
              const auto reps = conditional_density_check(coeffs, grid, s_node, t_nodes[q], o->pasts, o->n, policy,
                                                          derive_seed(g.seed, q, 7), ref);
              double worst = 0.0;
              for (std::size_t p = 0; p < reps.size(); ++p) {
                add_density_rows(t, {joined(ts[q]), cell(p)}, reps[p]);
                s.rows.push_back(
                    concat({joined(ts[q]), cell(reps[p].shape_scale), cell(p), cell(m->d)}, fit_cells(reps[p])));
                pass = pass && reps[p].pass && (!ref || reps[p].sup_rel_error <= o->tol);
                worst = std::max(worst, reps[p].c_up);
              }
              seps.push_back(reps.front().shape_scale);
              c_up.push_back(worst);
            }
            Outcome out;
            out.tables.push_back(std::move(t));
            out.tables.push_back(std::move(s));
            if (ts.size() >= 2) {
              const EnvelopeRate er = envelope_rate(seps, c_up, m->d, o->rate_tol);
              Table e{"envelope", {"separation", "c_up", "envelope"}, {}};
              for (std::size_t i = 0; i < seps.size(); ++i) e.row(seps[i], c_up[i], er.envelopes[i]);
              Table f{"envelope_fit", {"slope", "slope_stderr", "expected", "tolerance", "pass"}, {}};
              f.row(er.slope, er.slope_stderr, er.expected, er.tolerance, er.pass);
              out.tables.push_back(std::move(e));
              out.tables.push_back(std::move(f));
              pass = pass && er.pass;
              out.summary["envelope_slope"] = er.slope;
            }
            out.pass = pass;
            return out;
          }};
}

Command girsanov_cmd(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("girsanov", "Hit probability with drift, directly and by change of measure");
  auto m = std::make_shared<ModelOpts>();
  auto gr = std::make_shared<GridOpts>();
  struct Opts {
    std::string set;
    std::size_t n = 10000;
    std::string margin = "continuity";
  };
  auto o = std::make_shared<Opts>();
  add_model_options(sub, *m, false, true);
  add_grid_options(sub, *gr, 16);
  sub->add_option("--set", o->set, "Target set")->required();
  sub->add_option("--n", o->n, "Paths")->capture_default_str();
  sub->add_option("--margin", o->margin, "Margin policy")->capture_default_str();
  return {sub, [=, &g]() {
            if (m->drift.empty()) throw ConfigError("girsanov needs --drift");
            const Grid grid = make_grid(*gr, 2);
            const Coefficients coeffs = coefficients(*m);
            const CompactSet set = compact_set(o->set, m->d);
            const double margin = margin_policy(o->margin).margin(grid, gr->win(), coeffs.uniform_bound_T);
            if (o->n < 2) throw ConfigError("--n must be >= 2");
            const auto r = girsanov_crosscheck(coeffs, grid, set, gr->win(), o->n, margin, g.seed);
            Table t{"girsanov",
                    {"set", "n_paths", "margin", "a", "a_stderr", "a_ci_low", "a_ci_high", "b", "b_stderr",
                     "difference", "combined_stderr", "paired_stderr", "z", "l_mean", "l_stderr", "pass_identity",
                     "pass_l"},
                    {}};
            t.row(o->set, r.n_paths, r.margin, r.a, r.a_stderr, r.a_ci.low, r.a_ci.high, r.b, r.b_stderr, r.difference,
                  r.combined_stderr, r.paired_stderr, r.z, r.l_mean, r.l_stderr, r.pass_identity, r.pass_l);
            Outcome out;
            out.tables.push_back(std::move(t));
            out.pass = r.pass_identity && r.pass_l;
            out.summary = {{"a", r.a}, {"b", r.b}, {"l_mean", r.l_mean}};
            return out;
          }};
}

Command phi_cmd(CLI::App& app, const Global&) {
  auto* sub = app.add_subcommand("phi", "Radial integral regimes");
  struct Opts {
    double alpha = 0.5;
    double beta = 2.0;
    int n = 2;
    std::string radii = "0.1:1000:41";
    double r0 = 0.1;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--alpha", o->alpha, "Exponent alpha in (0, 1)")->capture_default_str();
  sub->add_option("--beta", o->beta, "Exponent beta")->capture_default_str();
  sub->add_option("--N", o->n, "Parameter dimension")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--radii", o->radii, "lo:hi:k log-spaced, or a comma list")->capture_default_str();
  sub->add_option("--r0", o->r0, "Smallest admissible radius")->capture_default_str();
  return {sub, [=]() {
            PhiReport rep;
            try {
              rep = phi_check(o->alpha, o->beta, o->n, parse_values(o->radii), o->r0);
            } catch (const ConfigError&) {
              throw;
            } catch (const std::invalid_argument& e) {
              throw ConfigError(e.what());
            }
            Table t{"phi", {"r", "phi"}, {}};
            for (std::size_t i = 0; i < rep.r.size(); ++i) t.row(rep.r[i], rep.phi[i]);
            Table s{"phi_summary", {"alpha", "beta", "N", "regime", "variation", "decade_slopes", "pass"}, {}};
            s.row(rep.alpha, rep.beta, rep.n, rep.regime, rep.variation, joined(rep.decade_slopes), rep.pass);
            Outcome out;
            out.tables.push_back(std::move(t));
            out.tables.push_back(std::move(s));
            out.pass = rep.pass;
            out.summary = {{"regime", rep.regime}};
            return out;
          }};
}

Command sandwich_cmd(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("sandwich", "Hit probability against capacity over a family of sets");
  auto m = std::make_shared<ModelOpts>();
  auto gr = std::make_shared<GridOpts>();
  struct Opts {
    std::vector<std::string> sets;
    double beta = std::numeric_limits<double>::quiet_NaN();
    double log_scale = 1.0;
    std::string resolutions = "10";
    std::size_t n = 10000;
    std::string margin = "continuity";
    std::string polar_margin = "zero";
    double ceiling = 20.0;
  };
  auto o = std::make_shared<Opts>();
  add_model_options(sub, *m);
  add_grid_options(sub, *gr, 128);
  sub->add_option("--set", o->sets, "Member of the family (repeatable)")->required();
  sub->add_option("--beta", o->beta, "Capacity exponent (default d - N/alpha)");
  sub->add_option("--log-scale", o->log_scale, "M of the logarithmic kernel")->capture_default_str();
  sub->add_option("--resolutions", o->resolutions, "Capacity points per axis")->capture_default_str();
  sub->add_option("--n", o->n, "Paths")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--margin", o->margin, "Margin policy for sets of positive capacity")->capture_default_str();
  sub->add_option("--polar-margin", o->polar_margin, "Margin for capacity-zero sets: zero or policy")
      ->capture_default_str()
      ->check(CLI::IsMember({"zero", "policy"}));
  sub->add_option("--ceiling", o->ceiling, "Allowed band")->capture_default_str();
  return {sub, [=, &g]() {
            const Grid grid = make_grid(*gr, m->params());
            const PathSource src = make_source(*m, grid);
            const MarginPolicy policy = margin_policy(o->margin);
            const double margin = policy.margin(grid, gr->win(), noise_scale(src));
            const double beta = std::isnan(o->beta) ? m->codimension() : o->beta;
            const auto res = to_ints(parse_numbers(o->resolutions), "--resolutions");
            std::vector<CompactSet> sets;
            for (const auto& s : o->sets) sets.push_back(compact_set(s, m->d));
            std::vector<CapacityResult> caps;
            std::vector<double> margins;
            try {
              const RieszKernel k(beta, m->d, o->log_scale);
              for (const auto& s : sets) {
                caps.push_back(capacity_of(s, k, res));
                margins.push_back(caps.back().value == 0.0 && o->polar_margin == "zero" ? 0.0 : margin);
              }
            } catch (const std::invalid_argument& e) {
              throw ConfigError(e.what());
            }
            const auto hits = estimate_hit_probs(src, sets, margins, gr->win(), o->n, g.seed);
            const auto rep = sandwich_report(o->sets, caps, hits, o->ceiling);
            Table t{"sandwich",
                    {"set", "capacity", "p_hat", "ci_low", "ci_high", "n_paths", "margin", "ratio", "polar",
                     "polarity_violation"},
                    {}};
            for (std::size_t i = 0; i < rep.rows.size(); ++i) {
              const auto& r = rep.rows[i];
              t.row(r.id, r.capacity, r.p_hat, r.ci_low, r.ci_high, r.n_paths, margins[i], r.ratio, r.polar,
                    r.polarity_violation);
            }
            Table s{"sandwich_summary", {"beta", "band", "k_fit", "ceiling", "violations", "pass"}, {}};
            s.row(beta, rep.band, rep.k_fit, rep.ceiling, rep.violations, rep.pass);
            Outcome out;
            out.tables.push_back(std::move(t));
            out.tables.push_back(std::move(s));
            out.pass = rep.pass;
            out.summary = {{"band", rep.band}, {"violations", rep.violations}};
            return out;
          }};
}

Command dimension_cmd(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("dimension", "Box-counting dimension of the range over the window");
  auto m = std::make_shared<ModelOpts>();
  auto gr = std::make_shared<GridOpts>();
  struct Opts {
    std::string scales = "0.05:2:12";
    std::size_t drop_coarse = 2;
    std::size_t drop_fine = 2;
    double min_r2 = 0.9;
    double expected = std::numeric_limits<double>::quiet_NaN();
    double tol = 0.6;
  };
  auto o = std::make_shared<Opts>();
  add_model_options(sub, *m);
  add_grid_options(sub, *gr, 1024);
  sub->add_option("--scales", o->scales, "Box sizes, lo:hi:k or a comma list")->capture_default_str();
  sub->add_option("--drop-coarse", o->drop_coarse, "Coarsest scales left out of the fit")->capture_default_str();
  sub->add_option("--drop-fine", o->drop_fine, "Finest scales left out of the fit")->capture_default_str();
  sub->add_option("--min-r2", o->min_r2, "Fits below this r^2 are unreliable")->capture_default_str();
  sub->add_option("--expected", o->expected, "Expected dimension (default min(d, N/alpha))");
  sub->add_option("--tol", o->tol, "Allowed |slope - expected|")->capture_default_str();
  return {sub, [=, &g]() {
            const Grid grid = make_grid(*gr, m->params());
            const PathSource src = make_source(*m, grid);
            const auto scales = parse_values(o->scales);
            for (double s : scales)
              if (!(s > 0.0)) throw ConfigError("--scales must be > 0");
            if (o->drop_coarse + o->drop_fine + 2 > scales.size())
              throw ConfigError("fewer than 2 scales left after dropping");
            const double expected =
                std::isnan(o->expected) ? std::min<double>(m->d, m->params() / m->alpha()) : o->expected;
            std::vector<double> points;
            {
              PathSource::Worker w(src);
              const FieldPath& p = w.sample(derive_seed(g.seed, 0));
              for (std::size_t node : window_nodes(grid, gr->window[0], gr->window[1])) {
                const auto v = p.at(node);
                points.insert(points.end(), v.begin(), v.end());
              }
            }
            const auto est =
                estimate_dimension(points, m->d, scales, {o->drop_coarse, o->drop_fine, o->min_r2}, expected);
            Table t{"dimension", {"scale", "count", "in_band"}, {}};
            for (std::size_t i = 0; i < scales.size(); ++i)
              t.row(scales[i], est.counts[i], static_cast<bool>(est.in_band[i]));
            const bool pass = est.reliable && std::abs(est.slope - expected) <= o->tol;
            Table s{"dimension_summary",
                    {"source", "points", "slope", "slope_stderr", "r_squared", "expected", "tol", "reliable", "pass"},
                    {}};
            s.row(src.describe(), points.size() / static_cast<std::size_t>(m->d), est.slope, est.slope_stderr,
                  est.r_squared, expected, o->tol, est.reliable, pass);
            Outcome out;
            out.tables.push_back(std::move(t));
            out.tables.push_back(std::move(s));
            out.pass = pass;
            out.summary = {{"slope", est.slope}, {"expected", expected}};
            return out;
          }};
}

Command a1_cmd(CLI::App& app, const Global& g) {
  auto* sub = app.add_subcommand("check-a1", "Covariance regularity conditions of a Gaussian field");
  auto m = std::make_shared<ModelOpts>();
  struct Opts {
    std::vector<double> window{1.0, 2.0};
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double gamma = 1.0;
    std::size_t pairs = 20000;
    double alpha_tol = 0.05;
    A1Options a1;
  };
  auto o = std::make_shared<Opts>();
  add_model_options(sub, *m, true);
  sub->add_option("--window", o->window, "Parameter window a,b")->delimiter(',')->expected(2)->capture_default_str();
  sub->add_option("--alpha", o->alpha, "Exponent alpha under test (default the model's)");
  sub->add_option("--gamma", o->gamma, "Exponent gamma under test")->capture_default_str();
  sub->add_option("--pairs", o->pairs, "Sampled parameter pairs")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--alpha-tol", o->alpha_tol, "Allowed |alpha_fit - alpha|")->capture_default_str();
  sub->add_option("--delta-fraction", o->a1.delta_fraction, "delta as a fraction of b - a")->capture_default_str();
  sub->add_option("--floor-fraction", o->a1.floor_fraction, "Smallest separation as a fraction of b - a")
      ->capture_default_str();
  sub->add_option("--growth-ceiling", o->a1.growth_ceiling, "Allowed drift of a fitted ratio")->capture_default_str();
  sub->add_option("--strata", o->a1.strata, "Separation strata")->capture_default_str();
  return {sub, [=, &g]() {
            if (o->window.size() != 2) throw ConfigError("--window must be a,b");
            CovarianceModel cm;
            cm.family = parse_family(m->model);
            cm.hurst = m->hurst;
            cm.fbm_scale = m->fbm_scale;
            try {
              cm.validate();
            } catch (const std::invalid_argument& e) {
              throw ConfigError(e.what());
            }
            const double alpha = std::isnan(o->alpha) ? m->alpha() : o->alpha;
            A1Report r;
            try {
              r = check_hypothesis_a1(cm, m->n_params, o->window[0], o->window[1], alpha, o->gamma, o->pairs, g.seed,
                                      o->a1);
            } catch (const std::invalid_argument& e) {
              throw ConfigError(e.what());
            }
            const bool pass = r.all_pass() && std::abs(r.alpha_fit - alpha) <= o->alpha_tol;
            Table t{"a1",
                    {"model", "alpha", "gamma", "alpha_fit", "alpha_fit_stderr", "c1", "c2", "c3", "c4", "c5", "delta",
                     "epsilon", "pass_31", "pass_32", "pass_33", "pass_34", "n_pairs", "pass"},
                    {}};
            t.row(m->model, r.alpha, r.gamma, r.alpha_fit, r.alpha_fit_stderr, r.c1, r.c2, r.c3, r.c4, r.c5, r.delta,
                  r.epsilon, r.pass_31, r.pass_32, r.pass_33, r.pass_34, r.n_pairs, pass);
            Outcome out;
            out.tables.push_back(std::move(t));
            out.pass = pass;
            out.summary = {{"alpha_fit", r.alpha_fit}, {"sample", r.sample_description}};
            return out;
          }};
}

json versions() {
  return {{"sheetcap", SHEETCAP_VERSION},
          {"compiler", __VERSION__},
          {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"fmt", FMT_VERSION},
          {"cli11", CLI11_VERSION},
          {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                        NLOHMANN_JSON_VERSION_PATCH)},
          {"openmp", _OPENMP}};
}

bool is_flag(const CLI::Option* opt) { return opt->get_expected_max() == 0; }

bool skipped(const CLI::Option* opt) {
  const std::string name = opt->get_single_name();
  return name.empty() || name == "help" || name == "config" || name == "version";
}

/// Resolved value strings of an option: given values, else the default.
std::vector<std::string> resolved(const CLI::Option* opt) {
  if (is_flag(opt)) return {opt->count() ? "true" : "false"};
  if (opt->count()) return opt->results();
  const std::string def = opt->get_default_str();
  if (def.empty()) return {};
  // vector defaults render as "[a,b]"
  if (def.size() >= 2 && def.front() == '[' && def.back() == ']') {
    std::vector<std::string> parts;
    std::stringstream ss(def.substr(1, def.size() - 2));
    for (std::string item; std::getline(ss, item, ',');) parts.push_back(item);
    return parts;
  }
  return {def};
}

json option_values(const CLI::App* app) {
  json out = json::object();
  for (const CLI::Option* opt : app->get_options()) {
    if (skipped(opt)) continue;
    const auto v = resolved(opt);
    if (v.empty())
      out[opt->get_single_name()] = nullptr;
    else
      out[opt->get_single_name()] = v.size() == 1 ? json(v.front()) : json(v);
  }
  return out;
}

std::string toml_value(const std::string& v) {
  if (v == "true" || v == "false" || (!v.empty() && v.front() == '[')) return v;
  try {
    std::size_t used = 0;
    (void)std::stod(v, &used);
    if (used == v.size()) return v;
  } catch (const std::exception&) {
  }
  return json(v).dump();
}

/// The resolved configuration of one run, readable back through --config.
std::string toml_config(const CLI::App* app, const CLI::App* sub) {
  std::string out;
  auto section = [&](const CLI::App* a) {
    for (const CLI::Option* opt : a->get_options()) {
      if (skipped(opt)) continue;
      const auto v = resolved(opt);
      if (v.empty()) continue;
      out += opt->get_single_name() + "=";
      if (v.size() == 1 && opt->get_expected_max() <= 1) {
        out += toml_value(v.front());
      } else {
        out += "[";
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + toml_value(v[i]);
        out += "]";
      }
      out += "\n";
    }
  };
  section(app);
  out += "[" + sub->get_name() + "]\n";
  section(sub);
  return out;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Capacity, hitting and density experiments for multiparameter fields and a planar SPDE", "sheetcap"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_config("--config", "", "TOML config file; command-line flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", SHEETCAP_VERSION);

  Global g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("--strict", g.strict, "Exit 3 when a verification fails");
  app.add_option("--threads", g.threads, "Worker threads (0: SHEETCAP_THREADS or the OpenMP default)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);

  std::vector<Command> commands{simulate_cmd(app, g), capacity_cmd(app, g),    hitprob_cmd(app, g),
                                scaling_cmd(app, g),  h1_cmd(app, g),          h2_cmd(app, g),
                                density_cmd(app, g),  conditional_cmd(app, g), girsanov_cmd(app, g),
                                phi_cmd(app, g),      sandwich_cmd(app, g),    dimension_cmd(app, g),
                                a1_cmd(app, g)};

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Ok : ConfigProblem;
  }

  const Command* cmd = nullptr;
  for (const auto& c : commands)
    if (c.app->parsed()) cmd = &c;
  if (!cmd) return ConfigProblem;

  const int previous_workers = worker_count();
  if (g.threads > 0) {
    set_worker_count(g.threads);
    omp_set_num_threads(g.threads);
  }
  struct Restore {
    int threads, workers;
    ~Restore() {
      if (threads > 0) {
        set_worker_count(0);
        omp_set_num_threads(workers);
      }
    }
  } restore{g.threads, previous_workers};

  const fs::path out_dir(g.out);
  const auto started = std::chrono::steady_clock::now();
  Outcome outcome;
  try {
    if (fs::exists(out_dir) && !fs::is_directory(out_dir))
      throw ConfigError("output path " + out_dir.string() + " exists and is not a directory");
    outcome = cmd->run();
  } catch (const std::invalid_argument& e) {
    std::cerr << "sheetcap " << cmd->app->get_name() << ": configuration error: " << e.what() << "\n";
    return ConfigProblem;
  } catch (const std::exception& e) {
    std::cerr << "sheetcap " << cmd->app->get_name() << ": " << e.what() << "\n";
    return Failure;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  json manifest;
  manifest["command"] = cmd->app->get_name();
  manifest["seed"] = g.seed;
  manifest["strict"] = g.strict;
  manifest["threads"] = worker_count();
  manifest["config"] = toml_config(&app, cmd->app);
  manifest["options"] = {{"global", option_values(&app)}, {cmd->app->get_name(), option_values(cmd->app)}};
  manifest["versions"] = versions();
  manifest["wall_time_seconds"] = wall;
  manifest["pass"] = outcome.pass ? json(*outcome.pass) : json(nullptr);
  manifest["summary"] = outcome.summary;
  json files = json::array();
  try {
    fs::create_directories(out_dir);
    for (const auto& t : outcome.tables) {
      write_table(out_dir, t);
      files.push_back(t.name + ".csv");
    }
    manifest["outputs"] = files;
    std::ofstream f(out_dir / "manifest.json", std::ios::binary);
    f << manifest.dump(2) << '\n';
    if (!f) throw std::runtime_error("cannot write manifest.json");
  } catch (const std::exception& e) {
    std::cerr << "sheetcap: cannot write outputs to " << out_dir.string() << ": " << e.what() << "\n";
    return ConfigProblem;
  }

  if (outcome.pass && !*outcome.pass) {
    std::cerr << "sheetcap " << cmd->app->get_name() << ": verification failed\n";
    if (g.strict) return VerificationFailed;
  }
  return Ok;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"sheetcap"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace sheetcap::cli
