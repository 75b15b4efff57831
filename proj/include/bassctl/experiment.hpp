#pragma once

// Experiment recipes behind the command-line tool. Each command is a pure
// function of its configuration, input files and seeds, and returns the file
// contents it would write so callers can compare runs byte for byte.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bassctl/control.hpp"
#include "bassctl/integrate.hpp"
#include "bassctl/io.hpp"
#include "bassctl/model.hpp"
#include "bassctl/objective.hpp"
#include "bassctl/optimize.hpp"
#include "bassctl/oracle.hpp"

namespace bassctl {

struct ExperimentConfig {
  ModelParams params;
  std::size_t order_m = 3;
  std::size_t order_n = 3;
  // Solve at these orders first and pad the result as the starting point.
  std::optional<std::pair<std::size_t, std::size_t>> warm_start_orders;
  double x0_lo = 0.05;
  double x0_hi = 0.95;
  std::size_t x0_count = 19;
  std::size_t n_steps = TimeGrid::kDefaultSteps;
  OptimizerConfig optimizer;
  double nonneg_penalty = 0.0;
  NoiseModel noise_model = NoiseModel::dynamics;
  std::size_t n_paths = 2000;
  std::uint64_t base_seed = 1;
  // Initial conditions for the Monte Carlo noise-equivalence checks.
  std::vector<double> mc_x0 = {0.35, 0.5, 0.75};
  std::size_t gradient_checks = 20;

  X0Grid x0grid() const { return X0Grid::uniform(x0_lo, x0_hi, x0_count); }
  TimeGrid grid() const { return TimeGrid(n_steps, params.horizon_t); }
  SurfaceShape shape() const { return {order_m, order_n, params.horizon_t, x0_lo, x0_hi}; }
  ObjectiveOptions objective_options() const { return {nonneg_penalty}; }
  std::string tag() const { return "m" + std::to_string(order_m) + "n" + std::to_string(order_n); }

  void validate() const {
    params.validate();
    optimizer.validate();
    shape().validate();
    x0grid();
    grid();
    if (n_paths < 2) throw std::invalid_argument("ExperimentConfig: n_paths must be >= 2");
    if (nonneg_penalty < 0.0) throw std::invalid_argument("ExperimentConfig: nonneg_penalty must be >= 0");
    if (warm_start_orders && (warm_start_orders->first > order_m || warm_start_orders->second > order_n)) {
      throw std::invalid_argument("ExperimentConfig: warm-start orders exceed target orders");
    }
    for (double x0 : mc_x0) {
      if (!(x0 >= x0_lo && x0 <= x0_hi)) throw std::invalid_argument("ExperimentConfig: mc_x0 outside x0 range");
    }
  }
};

inline std::vector<std::string> preset_names() { return {"paper", "paper-m3", "paper-m5", "alpha0", "noiseless"}; }

/// alpha = 2, C = 1, beta = 1/2, xi = 1/4, sigma = 0.1; T = 10 and x0 in
/// [0.05, 0.95] are this tool's own choices.
inline ExperimentConfig preset(const std::string& name) {
  ExperimentConfig cfg;
  if (name == "paper-m3") return cfg;
  if (name == "paper" || name == "paper-m5") {
    cfg.order_m = cfg.order_n = 5;
    cfg.warm_start_orders = std::pair<std::size_t, std::size_t>{3, 3};
    return cfg;
  }
  if (name == "alpha0") {
    cfg.params.alpha = 0.0;
    return cfg;
  }
  if (name == "noiseless") {
    cfg = preset("paper-m5");
    cfg.params.sigma = 0.0;
    return cfg;
  }
  throw std::invalid_argument("unknown preset '" + name + "'");
}

inline json to_json(const ExperimentConfig& c) {
  json j{{"params", to_json(c.params)},
         {"M", c.order_m},
         {"N", c.order_n},
         {"x0_lo", c.x0_lo},
         {"x0_hi", c.x0_hi},
         {"x0_count", c.x0_count},
         {"n_steps", c.n_steps},
         {"optimizer",
          {{"step_size", c.optimizer.step_size},
           {"max_iters", c.optimizer.max_iters},
           {"grad_tol", c.optimizer.grad_tol},
           {"rel_obj_tol", c.optimizer.rel_obj_tol},
           {"grad_method", c.optimizer.grad_method == GradientMethod::sensitivity ? "sensitivity" : "finite_difference"},
           {"fd_epsilon", c.optimizer.fd_epsilon}}},
         {"nonneg_penalty", c.nonneg_penalty},
         {"noise_model", std::string(to_string(c.noise_model))},
         {"n_paths", c.n_paths},
         {"base_seed", c.base_seed},
         {"mc_x0", c.mc_x0},
         {"gradient_checks", c.gradient_checks}};
  if (c.warm_start_orders) j["warm_start_orders"] = {c.warm_start_orders->first, c.warm_start_orders->second};
  return j;
}

/// Applies the keys present in `j` on top of `base`. `params` may be partial.
inline ExperimentConfig apply_overrides(ExperimentConfig cfg, const json& j) {
  constexpr const char* what = "config";
  detail::reject_unknown_keys(j, {"params", "M", "N", "warm_start_orders", "x0_lo", "x0_hi", "x0_count", "n_steps",
                                  "optimizer", "nonneg_penalty", "noise_model", "n_paths", "base_seed", "mc_x0",
                                  "gradient_checks"},
                              what);
  try {
    if (j.contains("params")) {
      json merged = to_json(cfg.params);
      detail::reject_unknown_keys(j["params"], {"alpha", "cost_c", "beta", "xi_cost", "sigma", "horizon_t"}, "params");
      for (const auto& item : j["params"].items()) merged[item.key()] = item.value();
      cfg.params = model_params_from_json(merged);
    }
    if (j.contains("M")) cfg.order_m = j["M"].get<std::size_t>();
    if (j.contains("N")) cfg.order_n = j["N"].get<std::size_t>();
    if (j.contains("warm_start_orders")) {
      if (j["warm_start_orders"].is_null()) {
        cfg.warm_start_orders.reset();
      } else {
        const auto orders = j["warm_start_orders"].get<std::vector<std::size_t>>();
        if (orders.size() != 2) throw FormatError("config: warm_start_orders must be [M, N]");
        cfg.warm_start_orders = std::pair{orders[0], orders[1]};
      }
    }
    if (j.contains("x0_lo")) cfg.x0_lo = j["x0_lo"].get<double>();
    if (j.contains("x0_hi")) cfg.x0_hi = j["x0_hi"].get<double>();
    if (j.contains("x0_count")) cfg.x0_count = j["x0_count"].get<std::size_t>();
    if (j.contains("n_steps")) cfg.n_steps = j["n_steps"].get<std::size_t>();
    if (j.contains("optimizer")) {
      const json& o = j["optimizer"];
      detail::reject_unknown_keys(o, {"step_size", "max_iters", "grad_tol", "rel_obj_tol", "grad_method", "fd_epsilon"},
                                  "optimizer");
      if (o.contains("step_size")) cfg.optimizer.step_size = o["step_size"].get<double>();
      if (o.contains("max_iters")) cfg.optimizer.max_iters = o["max_iters"].get<std::size_t>();
      if (o.contains("grad_tol")) cfg.optimizer.grad_tol = o["grad_tol"].get<double>();
      if (o.contains("rel_obj_tol")) cfg.optimizer.rel_obj_tol = o["rel_obj_tol"].get<double>();
      if (o.contains("fd_epsilon")) cfg.optimizer.fd_epsilon = o["fd_epsilon"].get<double>();
      if (o.contains("grad_method")) {
        const auto m = o["grad_method"].get<std::string>();
        if (m == "sensitivity") {
          cfg.optimizer.grad_method = GradientMethod::sensitivity;
        } else if (m == "finite_difference") {
          cfg.optimizer.grad_method = GradientMethod::finite_difference;
        } else {
          throw FormatError("optimizer: unknown grad_method '" + m + "'");
        }
      }
    }
    if (j.contains("nonneg_penalty")) cfg.nonneg_penalty = j["nonneg_penalty"].get<double>();
    if (j.contains("noise_model")) cfg.noise_model = parse_noise_model(j["noise_model"].get<std::string>());
    if (j.contains("n_paths")) cfg.n_paths = j["n_paths"].get<std::size_t>();
    if (j.contains("base_seed")) cfg.base_seed = j["base_seed"].get<std::uint64_t>();
    if (j.contains("mc_x0")) cfg.mc_x0 = j["mc_x0"].get<std::vector<double>>();
    if (j.contains("gradient_checks")) cfg.gradient_checks = j["gradient_checks"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// solve

struct SolveOutcome {
  SolveReport report;
  std::optional<SolveReport> warm_start;  // lower-order stage, when staged
  NonnegativityReport nonneg;
  json report_json;
  json coefficients_json;
};

inline SolveOutcome run_solve(const ExperimentConfig& cfg, const std::optional<FourierSurface>& initial = std::nullopt) {
  cfg.validate();
  const auto x0grid = cfg.x0grid();
  const auto grid = cfg.grid();
  const auto options = cfg.objective_options();

  SolveOutcome out{SolveReport{FourierSurface(cfg.shape())}, std::nullopt, {}, {}, {}};
  FourierSurface start(cfg.shape());
  if (initial) {
    if (!(initial->shape().horizon_t == cfg.params.horizon_t && initial->shape().x0_lo == cfg.x0_lo &&
          initial->shape().x0_hi == cfg.x0_hi)) {
      throw std::invalid_argument("warm-start surface has a different horizon or x0 interval");
    }
    start = initial->padded(cfg.order_m, cfg.order_n);
  } else if (cfg.warm_start_orders) {
    SurfaceShape small = cfg.shape();
    small.order_m = cfg.warm_start_orders->first;
    small.order_n = cfg.warm_start_orders->second;
    out.warm_start = solve(FourierSurface(small), x0grid, cfg.params, grid, cfg.optimizer, options);
    start = out.warm_start->final_surface.padded(cfg.order_m, cfg.order_n);
  }
  out.report = solve(start, x0grid, cfg.params, grid, cfg.optimizer, options);
  out.nonneg = nonnegativity_violation(out.report.final_surface, x0grid, grid);

  out.report_json = to_json(out.report);
  out.report_json["nonnegativity"] = to_json(out.nonneg);
  if (out.warm_start) {
    out.report_json["warm_start"] = {{"M", out.warm_start->final_surface.order_m()},
                                     {"N", out.warm_start->final_surface.order_n()},
                                     {"final_objective", out.warm_start->final_objective()},
                                     {"converged", out.warm_start->converged}};
  }
  out.report_json["config"] = to_json(cfg);
  out.coefficients_json = to_json(out.report.final_surface);
  return out;
}

// ---------------------------------------------------------------------------
// surface

struct LatticeSpec {
  std::size_t n_t = 101;
  std::size_t n_x0 = 19;
};

namespace detail {

/// Linear interpolation of node values at time t.
inline double sample_at(const Trajectory& traj, double t) {
  const TimeGrid& g = traj.grid;
  const double pos = t / g.dt();
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(std::floor(pos)), g.n_steps() - 1);
  const double frac = std::clamp(pos - static_cast<double>(k), 0.0, 1.0);
  if (frac == 0.0) return traj.states[k];
  if (frac == 1.0) return traj.states[k + 1];
  return traj.states[k] + frac * (traj.states[k + 1] - traj.states[k]);
}

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> v(count, lo);
  for (std::size_t i = 1; i < count; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  if (count > 1) v.back() = hi;
  return v;
}

inline Trajectory noisy_state(double x0, const TimeProfile& control, const ModelParams& params, const Trajectory& phi,
                              const NoisePath& noise, NoiseModel model) {
  switch (model) {
    case NoiseModel::dynamics: return integrate_sde(x0, control, params, noise);
    case NoiseModel::observer: return observe(phi, noise, params.sigma);
    case NoiseModel::none: return phi;
  }
  return phi;
}

}  // namespace detail

/// Rows (t, x0, u, x_det[, x_sample]) over an n_t x n_x0 lattice, x0 outer.
/// The sample column is one stochastic state surface; row x0_j uses seed
/// path_seed(seed, j).
inline std::string run_surface(const FourierSurface& surface, const ModelParams& params, const LatticeSpec& lattice,
                               std::size_t n_steps, std::optional<NoiseModel> noise_model = std::nullopt,
                               std::uint64_t seed = 0) {
  if (lattice.n_t < 2 || lattice.n_x0 < 1) throw std::invalid_argument("surface lattice needs n_t >= 2 and n_x0 >= 1");
  const TimeGrid grid(n_steps, surface.horizon_t());
  const auto ts = detail::linspace(0.0, surface.horizon_t(), lattice.n_t);
  const auto x0s = lattice.n_x0 == 1 ? std::vector<double>{surface.shape().x0_lo}
                                     : detail::linspace(surface.shape().x0_lo, surface.shape().x0_hi, lattice.n_x0);
  std::vector<std::string> columns{"t", "x0", "u", "x_det"};
  if (noise_model) columns.push_back("x_sample");
  CsvWriter csv(noise_model ? "bassctl.surface.v1+sample" : "bassctl.surface.v1", columns);
  for (std::size_t j = 0; j < x0s.size(); ++j) {
    const double x0 = x0s[j];
    const TimeProfile control = surface.slice(x0);
    const Trajectory phi = integrate_deterministic(x0, control, params, grid);
    std::optional<Trajectory> sample;
    if (noise_model) {
      sample = detail::noisy_state(x0, control, params, phi, sample_noise(grid, path_seed(seed, j)), *noise_model);
    }
    for (double t : ts) {
      std::vector<double> row{t, x0, control(t), detail::sample_at(phi, t)};
      if (sample) row.push_back(detail::sample_at(*sample, t));
      csv.row(row);
    }
  }
  return csv.str();
}

// ---------------------------------------------------------------------------
// paths

/// Columns t, x_det, sample_1..sample_k on the time grid; sample i uses seed
/// path_seed(seed, i - 1).
inline std::string run_paths(const FourierSurface& surface, const ModelParams& params, double x0, std::size_t n_samples,
                             std::uint64_t seed, NoiseModel model, std::size_t n_steps) {
  const TimeGrid grid(n_steps, surface.horizon_t());
  const TimeProfile control = surface.slice(x0);
  const Trajectory phi = integrate_deterministic(x0, control, params, grid);
  std::vector<Trajectory> samples;
  for (std::size_t i = 0; i < n_samples; ++i) {
    samples.push_back(detail::noisy_state(x0, control, params, phi, sample_noise(grid, path_seed(seed, i)), model));
  }
  std::vector<std::string> columns{"t", "x_det"};
  for (std::size_t i = 1; i <= n_samples; ++i) columns.push_back("sample_" + std::to_string(i));
  CsvWriter csv("bassctl.paths.v1", columns);
  for (std::size_t k = 0; k < grid.n_points(); ++k) {
    std::vector<double> row{grid.t(k), phi.states[k]};
    for (const auto& s : samples) row.push_back(s.states[k]);
    csv.row(row);
  }
  return csv.str();
}

// ---------------------------------------------------------------------------
// verify

/// Deterministic pseudo-random coefficient vectors for gradient checks.
inline std::vector<double> random_coefficients(std::size_t size, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 engine(seed);
  std::vector<double> v(size);
  for (double& a : v) a = scale * (2.0 * (static_cast<double>(engine() >> 11) * 0x1.0p-53) - 1.0);
  return v;
}

struct GradientCheck {
  double max_rel_error = 0.0;
  double max_abs_error_small = 0.0;  // over components with |g| below the floor
  bool passed = true;
};

/// Sensitivity gradient of the aggregate vs central differences.
inline GradientCheck check_gradient(const FourierSurface& surface, const X0Grid& x0grid, const ModelParams& params,
                                    const TimeGrid& grid, double fd_epsilon = 1e-5, double rel_tol = 1e-4,
                                    double small_floor = 1e-8) {
  GradientCheck out;
  const auto sens = aggregate_value_and_gradient(surface, x0grid, params, grid).gradient;
  const auto fd = gradient_fd(surface, x0grid, params, grid, fd_epsilon);
  for (std::size_t j = 0; j < sens.size(); ++j) {
    const double err = std::abs(sens[j] - fd[j]);
    if (std::abs(fd[j]) < small_floor && std::abs(sens[j]) < small_floor) {
      out.max_abs_error_small = std::max(out.max_abs_error_small, err);
      if (err > small_floor) out.passed = false;
    } else {
      const double rel = err / std::max(std::abs(fd[j]), std::abs(sens[j]));
      out.max_rel_error = std::max(out.max_rel_error, rel);
      if (rel > rel_tol) out.passed = false;
    }
  }
  return out;
}

struct OracleComparison {
  double x0 = 0.0;
  double j_fourier = 0.0;
  TranscriptionSolution oracle;
  PmpResidual residual;

  double relative_gap() const { return (j_fourier - oracle.objective) / std::abs(oracle.objective); }
  bool lower_bound_holds(double slack = 1e-6) const { return oracle.objective <= j_fourier + slack; }
};

inline OracleComparison compare_with_oracle(const FourierSurface& surface, double x0, const ModelParams& params,
                                            const TimeGrid& grid, bool enforce_nonneg = false) {
  OracleComparison c{x0, objective_deterministic(surface, x0, params, grid).value,
                     solve_transcription(x0, params, grid, enforce_nonneg), {}};
  c.residual = pmp_residual(c.oracle, x0, params);
  return c;
}

struct VerifyThresholds {
  double mc_std_errors = 3.0;
  double gradient_rel_tol = 1e-4;
  double oracle_rel_gap = 0.05;
  double lower_bound_slack = 1e-6;
  double pmp_residual = 1e-3;
};

struct VerifyOutcome {
  bool all_passed = true;
  json report;
};

/// Noise-equivalence Monte Carlo, gradient cross-checks, oracle gaps and PMP
/// residuals for one solved surface.
inline VerifyOutcome run_verify(const ExperimentConfig& cfg, const FourierSurface& surface,
                                const VerifyThresholds& thresholds = {}) {
  cfg.validate();
  const auto x0grid = cfg.x0grid();
  const auto grid = cfg.grid();
  VerifyOutcome out;
  json checks = json::array();
  auto add = [&](const std::string& name, bool passed, json details) {
    out.all_passed = out.all_passed && passed;
    checks.push_back({{"name", name}, {"passed", passed}, {"details", std::move(details)}});
  };

  for (NoiseModel model : {NoiseModel::dynamics, NoiseModel::observer}) {
    bool passed = true;
    json per_x0 = json::object();
    for (double x0 : cfg.mc_x0) {
      const auto est = objective_stochastic_mc(surface, x0, cfg.params, grid, cfg.n_paths, cfg.base_seed, model);
      passed = passed && est.within(thresholds.mc_std_errors);
      json e = to_json(est);
      e["deviation_in_std_errors"] = est.std_error > 0.0 ? est.deviation() / est.std_error : 0.0;
      if (model == NoiseModel::dynamics) e["superposition_mean"] = est.superposition_mean;
      per_x0[x0_key(x0)] = e;
    }
    add("noise_equivalence_" + std::string(to_string(model)), passed, per_x0);
  }

  {
    GradientCheck worst;
    for (std::size_t i = 0; i < cfg.gradient_checks; ++i) {
      const auto a = random_coefficients(surface.shape().size(), cfg.base_seed + 1000 + i, 0.5);
      const auto c = check_gradient(unflatten(a, surface.shape()), x0grid, cfg.params, grid, cfg.optimizer.fd_epsilon,
                                    thresholds.gradient_rel_tol);
      worst.max_rel_error = std::max(worst.max_rel_error, c.max_rel_error);
      worst.max_abs_error_small = std::max(worst.max_abs_error_small, c.max_abs_error_small);
      worst.passed = worst.passed && c.passed;
    }
    add("gradient_cross_check", worst.passed,
        {{"vectors", cfg.gradient_checks},
         {"max_rel_error", worst.max_rel_error},
         {"max_abs_error_small", worst.max_abs_error_small}});
  }

  bool gap_ok = true, bound_ok = true, pmp_ok = true;
  json oracle = json::object();
  for (double x0 : x0grid.points()) {
    if (!(x0 > 0.0 && x0 < 1.0)) continue;
    const auto c = compare_with_oracle(surface, x0, cfg.params, grid);
    gap_ok = gap_ok && c.relative_gap() <= thresholds.oracle_rel_gap;
    bound_ok = bound_ok && c.lower_bound_holds(thresholds.lower_bound_slack);
    pmp_ok = pmp_ok && c.residual.projected <= thresholds.pmp_residual;
    oracle[x0_key(x0)] = {{"j_fourier", c.j_fourier},
                          {"j_oracle", c.oracle.objective},
                          {"relative_gap", c.relative_gap()},
                          {"oracle_converged", c.oracle.converged},
                          {"oracle_iterations", c.oracle.iterations},
                          {"pmp_residual_projected", c.residual.projected},
                          {"pmp_residual_unprojected", c.residual.unprojected}};
  }
  add("oracle_lower_bound", bound_ok, {{"slack", thresholds.lower_bound_slack}});
  add("oracle_relative_gap", gap_ok, {{"threshold", thresholds.oracle_rel_gap}});
  add("pmp_residual", pmp_ok, {{"threshold", thresholds.pmp_residual}});

  out.report = {{"all_passed", out.all_passed}, {"checks", checks}, {"oracle", oracle}, {"config", to_json(cfg)}};
  return out;
}

}  // namespace bassctl
