#pragma once

// Performance index J(a; x0) = int_0^T (C u^2 - alpha phi u) dt, its sum over a
// set of initial conditions, and Monte Carlo estimators of the stochastic
// objectives under dynamics noise and observer noise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bassctl/control.hpp"
#include "bassctl/integrate.hpp"
#include "bassctl/model.hpp"

namespace bassctl {

/// Initial conditions, kept sorted ascending so every reduction over them runs
/// in one canonical order.
class X0Grid {
 public:
  X0Grid(std::vector<double> points, double lo, double hi) : points_(std::move(points)), lo_(lo), hi_(hi) {
    if (points_.empty()) throw std::invalid_argument("X0Grid: no points");
    if (!(lo_ >= 0.0 && hi_ <= 1.0 && lo_ <= hi_)) {
      throw std::invalid_argument("X0Grid: bounds must satisfy 0 <= lo <= hi <= 1");
    }
    std::sort(points_.begin(), points_.end());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!(points_[i] >= lo_ && points_[i] <= hi_)) {
        throw std::invalid_argument("X0Grid: point " + std::to_string(points_[i]) + " outside [lo, hi]");
      }
      if (i > 0 && points_[i] == points_[i - 1]) {
        throw std::invalid_argument("X0Grid: duplicate point " + std::to_string(points_[i]));
      }
    }
  }

  /// `count` evenly spaced points from lo to hi inclusive.
  static X0Grid uniform(double lo, double hi, std::size_t count) {
    if (count == 0) throw std::invalid_argument("X0Grid::uniform: count must be >= 1");
    std::vector<double> pts(count);
    if (count == 1) {
      pts[0] = lo;
    } else {
      for (std::size_t i = 0; i < count; ++i) {
        pts[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
      }
    }
    return X0Grid(std::move(pts), lo, hi);
  }

  /// {0.05, 0.10, ..., 0.95}
  static X0Grid default_grid() { return uniform(0.05, 0.95, 19); }

  const std::vector<double>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  std::vector<double> points_;
  double lo_;
  double hi_;
};

struct ObjectiveValue {
  double value = 0.0;
  std::string quad_rule = "trapezoid";
  std::size_t n_steps = 0;
};

/// Weight of the optional penalty lambda * int max(0, -u)^2 dt. Zero keeps the
/// unconstrained problem.
struct ObjectiveOptions {
  double nonneg_penalty = 0.0;
};

namespace detail {

inline void check_horizons(const SurfaceShape& shape, const ModelParams& params, const TimeGrid& grid) {
  const double tol = 1e-12 * std::max(1.0, params.horizon_t);
  if (std::abs(grid.t_end() - params.horizon_t) > tol || std::abs(shape.horizon_t - params.horizon_t) > tol) {
    throw std::invalid_argument("objective: surface, model and grid horizons differ");
  }
}

inline std::vector<double> sample_on_nodes(const TimeProfile& control, const TimeGrid& grid) {
  std::vector<double> u(grid.n_points());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = control(grid.t(k));
  return u;
}

/// int (C u^2 - alpha x u + lambda max(0,-u)^2) dt by the trapezoid rule on nodes.
inline double running_cost(std::span<const double> u, std::span<const double> x, const ModelParams& params,
                           const ObjectiveOptions& options, double dt) {
  std::vector<double> integrand(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double shortfall = std::max(0.0, -u[k]);
    integrand[k] = params.cost_c * u[k] * u[k] - params.alpha * x[k] * u[k] +
                   options.nonneg_penalty * shortfall * shortfall;
  }
  return trapezoid(integrand, dt);
}

}  // namespace detail

inline ObjectiveValue objective_deterministic(const FourierSurface& surface, double x0, const ModelParams& params,
                                              const TimeGrid& grid, const ObjectiveOptions& options = {}) {
  detail::check_horizons(surface.shape(), params, grid);
  const TimeProfile control = surface.slice(x0);
  const Trajectory phi = integrate_deterministic(x0, control, params, grid);
  const auto u = detail::sample_on_nodes(control, grid);
  return {detail::running_cost(u, phi.states, params, options, grid.dt()), "trapezoid", grid.n_steps()};
}

/// Sum of J over the grid, accumulated in ascending x0 order.
inline ObjectiveValue objective_aggregate(const FourierSurface& surface, const X0Grid& x0grid,
                                          const ModelParams& params, const TimeGrid& grid,
                                          const ObjectiveOptions& options = {}) {
  double total = 0.0;
  for (double x0 : x0grid.points()) total += objective_deterministic(surface, x0, params, grid, options).value;
  return {total, "trapezoid", grid.n_steps()};
}

enum class NoiseModel { none, dynamics, observer };

inline std::string_view to_string(NoiseModel model) {
  switch (model) {
    case NoiseModel::none: return "none";
    case NoiseModel::dynamics: return "dynamics";
    case NoiseModel::observer: return "observer";
  }
  return "none";
}

inline NoiseModel parse_noise_model(std::string_view name) {
  if (name == "none") return NoiseModel::none;
  if (name == "dynamics") return NoiseModel::dynamics;
  if (name == "observer") return NoiseModel::observer;
  throw std::invalid_argument("unknown noise model '" + std::string(name) + "' (expected dynamics|observer|none)");
}

struct MonteCarloEstimate {
  NoiseModel model = NoiseModel::dynamics;
  std::size_t n_paths = 0;
  std::uint64_t base_seed = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double j_det = 0.0;
  // Dynamics noise only: mean objective of the superposed paths phi + sigma W
  // driven by the same increments. Its distance from `mean` measures how far
  // the superposition is from the simulated SDE.
  double superposition_mean = 0.0;

  double deviation() const { return mean - j_det; }
  bool within(double n_std_errors) const { return std::abs(mean - j_det) <= n_std_errors * std_error; }
};

/// One sample of the stochastic objective.
///   dynamics: the state is an Euler-Maruyama path of the SDE, cost by trapezoid.
///   observer: the state is phi seen through y = phi + sigma xi. The noise part
///     int u sigma xi dt is the left-point sum sum_k u(t_k) sigma dW_k, which
///     telescopes to sigma u W(T) for constant u.
inline double stochastic_objective_sample(const TimeProfile& control, const Trajectory& phi,
                                          std::span<const double> u_nodes, double x0, const ModelParams& params,
                                          const NoisePath& noise, NoiseModel model,
                                          const ObjectiveOptions& options = {}) {
  const TimeGrid& grid = noise.grid;
  const double dt = grid.dt();
  switch (model) {
    case NoiseModel::none:
      return detail::running_cost(u_nodes, phi.states, params, options, dt);
    case NoiseModel::dynamics: {
      const Trajectory x = integrate_sde(x0, control, params, noise);
      return detail::running_cost(u_nodes, x.states, params, options, dt);
    }
    case NoiseModel::observer: {
      const Trajectory y = observe(phi, noise, params.sigma);
      double noise_term = 0.0;
      for (std::size_t k = 0; k < grid.n_steps(); ++k) noise_term += u_nodes[k] * (y.states[k] - phi.states[k]);
      return detail::running_cost(u_nodes, phi.states, params, options, dt) - params.alpha * noise_term * dt;
    }
  }
  return 0.0;
}

inline MonteCarloEstimate objective_stochastic_mc(const FourierSurface& surface, double x0, const ModelParams& params,
                                                  const TimeGrid& grid, std::size_t n_paths, std::uint64_t base_seed,
                                                  NoiseModel model, const ObjectiveOptions& options = {}) {
  if (n_paths < 2) throw std::invalid_argument("objective_stochastic_mc: n_paths must be >= 2");
  detail::check_horizons(surface.shape(), params, grid);
  const TimeProfile control = surface.slice(x0);
  const Trajectory phi = integrate_deterministic(x0, control, params, grid);
  const auto u = detail::sample_on_nodes(control, grid);
  const double j_det = detail::running_cost(u, phi.states, params, options, grid.dt());

  MonteCarloEstimate est{model, n_paths, base_seed, j_det, 0.0, j_det, j_det};
  if (params.sigma == 0.0 || model == NoiseModel::none) return est;

  // Welford accumulation in path-index order.
  double mean = 0.0;
  double m2 = 0.0;
  double superposed_sum = 0.0;
  std::vector<double> superposed(grid.n_points());
  for (std::size_t i = 0; i < n_paths; ++i) {
    const NoisePath noise = sample_noise(grid, path_seed(base_seed, i));
    const double sample = stochastic_objective_sample(control, phi, u, x0, params, noise, model, options);
    const double delta = sample - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (sample - mean);
    if (model == NoiseModel::dynamics) {
      const auto w = noise.brownian_path();
      for (std::size_t k = 0; k < superposed.size(); ++k) superposed[k] = phi.states[k] + params.sigma * w[k];
      superposed_sum += detail::running_cost(u, superposed, params, options, grid.dt());
    }
  }
  est.mean = mean;
  est.std_error = std::sqrt(m2 / static_cast<double>(n_paths - 1) / static_cast<double>(n_paths));
  est.superposition_mean = model == NoiseModel::dynamics ? superposed_sum / static_cast<double>(n_paths) : j_det;
  return est;
}

struct NonnegativityReport {
  double max_violation = 0.0;
  double measure_fraction = 0.0;
};

/// Scans u over the (time node, x0) lattice for negative effort.
inline NonnegativityReport nonnegativity_violation(const FourierSurface& surface, const X0Grid& x0grid,
                                                   const TimeGrid& grid) {
  NonnegativityReport report;
  std::size_t negative = 0;
  std::size_t total = 0;
  for (double x0 : x0grid.points()) {
    const TimeProfile control = surface.slice(x0);
    for (std::size_t k = 0; k < grid.n_points(); ++k) {
      const double u = control(grid.t(k));
      ++total;
      if (u < 0.0) {
        ++negative;
        report.max_violation = std::max(report.max_violation, -u);
      }
    }
  }
  report.measure_fraction = static_cast<double>(negative) / static_cast<double>(total);
  return report;
}

}  // namespace bassctl
